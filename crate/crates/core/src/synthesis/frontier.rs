use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{
    apply_filter, coherence, coherence_tsallis, mean_energy, success_probability, tensor_filter,
    DiagonalFilter, EnergySpectrum, QState, ZERO_POPULATION,
};

use super::{
    check_success_probability, coherence_min_success, coherence_optimal_filter_pure,
    energy_min_success, energy_optimal_filter, tsallis_optimal_filter, FilterTarget,
};

pub const DEFAULT_GRID: usize = 200;

/// Filter family a frontier is traced over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Output of the optimal synthesizers.
    Optimal,
    /// Tensor powers of the single-qubit filter `b|0⟩⟨0| + |1⟩⟨1|`.
    Factorized,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Optimal => "optimal",
            Family::Factorized => "factorized",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(Family::Optimal),
            "factorized" => Ok(Family::Factorized),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

/// One sample of a trade-off curve, evaluated on the filtered state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub p_success: f64,
    /// Relative-entropy coherence in nats.
    pub coherence: f64,
    pub coherence_tsallis: f64,
    pub mean_energy: f64,
    pub filter: DiagonalFilter,
    pub family: Family,
}

/// Evaluates `filter` on `state` and packages the measures.
pub fn frontier_point(
    state: &QState,
    spectrum: &EnergySpectrum,
    filter: DiagonalFilter,
    family: Family,
) -> Result<FrontierPoint> {
    let (out, p_success) = apply_filter(state, &filter)?;
    Ok(FrontierPoint {
        p_success,
        coherence: coherence(&out),
        coherence_tsallis: coherence_tsallis(&out),
        mean_energy: mean_energy(&out, spectrum)?,
        filter,
        family,
    })
}

/// Dispatches to the optimal synthesizer for `target`.
pub fn optimal_filter(
    state: &QState,
    spectrum: &EnergySpectrum,
    target: FilterTarget,
    ps: f64,
) -> Result<DiagonalFilter> {
    match target {
        FilterTarget::Energy => energy_optimal_filter(state, spectrum, ps),
        FilterTarget::Coherence => coherence_optimal_filter_pure(state, ps),
        FilterTarget::CoherenceTsallis => tsallis_optimal_filter(state, ps),
    }
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "factorized filters need 2^n levels, got {dim}"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn factorized_weights(n_qubits: usize, b: f64) -> DiagonalFilter {
    let single = DiagonalFilter::from_real(&[b, 1.0]).expect("b in [0, 1]");
    (1..n_qubits).fold(single.clone(), |acc, _| tensor_filter(&acc, &single))
}

/// Factorized filter `(b|0⟩⟨0| + |1⟩⟨1|)^{⊗n}` whose success probability is
/// `ps`; `P_S(b)` is increasing in `b`, so `b` is found by bisection.
pub fn factorized_filter(state: &QState, ps: f64) -> Result<DiagonalFilter> {
    let n = qubit_count(state.dim())?;
    let ps = check_success_probability(ps)?;
    let p_of = |b: f64| success_probability(state, &factorized_weights(n, b)).expect("dims match");
    let floor = p_of(0.0);
    if ps < floor - super::RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: ps,
            reason: format!("below the b = 0 success probability {floor}"),
        });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p_of(mid) < ps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = if (p_of(lo) - ps).abs() <= (p_of(hi) - ps).abs() {
        lo
    } else {
        hi
    };
    Ok(factorized_weights(n, b))
}

/// `P_S` interval swept by a frontier. A lower end of zero means the range
/// is open there and is sampled from `1/grid`.
pub fn reachable_range(
    state: &QState,
    spectrum: &EnergySpectrum,
    target: FilterTarget,
    family: Family,
) -> Result<(f64, f64)> {
    let lo = match (family, target) {
        (Family::Factorized, _) => {
            qubit_count(state.dim())?;
            let top = state.populations()[state.dim() - 1];
            if top < ZERO_POPULATION {
                0.0
            } else {
                top
            }
        }
        (Family::Optimal, FilterTarget::Energy) => energy_min_success(state, spectrum)?,
        (Family::Optimal, FilterTarget::Coherence) => {
            if !state.is_pure(super::PURITY_TOL) {
                return Err(Error::NotPure);
            }
            coherence_min_success(state)
        }
        (Family::Optimal, FilterTarget::CoherenceTsallis) => 0.0,
    };
    if lo >= 1.0 - super::RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: lo,
            reason: "empty reachable range".into(),
        });
    }
    Ok((lo, 1.0))
}

/// Samples a frontier uniformly in `P_S` over its reachable range, sorted by
/// `P_S`. Points are evaluated in parallel and merged in grid order.
pub fn trace_frontier(
    state: &QState,
    spectrum: &EnergySpectrum,
    target: FilterTarget,
    family: Family,
    grid: usize,
) -> Result<Vec<FrontierPoint>> {
    if grid < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid must be ≥ 2, got {grid}"
        )));
    }
    if state.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            found: state.dim(),
        });
    }
    let (lo, hi) = reachable_range(state, spectrum, target, family)?;
    let grid_points: Vec<f64> = if lo > 0.0 {
        (0..grid)
            .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
            .collect()
    } else {
        (1..=grid).map(|i| i as f64 / grid as f64).collect()
    };

    let mut points: Vec<FrontierPoint> = grid_points
        .par_iter()
        .map(|&ps| {
            let filter = match family {
                Family::Optimal => optimal_filter(state, spectrum, target, ps)?,
                Family::Factorized => factorized_filter(state, ps)?,
            };
            frontier_point(state, spectrum, filter, family)
        })
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.p_success.total_cmp(&b.p_success));
    Ok(points)
}
