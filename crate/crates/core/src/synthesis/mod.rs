//! Optimal diagonal filters at fixed success probability.
//!
//! The energy-optimal filters remove the lowest energy classes first, with at
//! most one fractional class at the cut. The coherence-optimal filters for
//! pure inputs clip the dominant populations to a common ceiling
//! (`M_j = min(K/p_j, 1)`). Mixed states are handled through Tsallis
//! coherence, for which the stationarity conditions are linear.

mod frontier;
mod mixed;
mod thermal;
mod tsallis;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DiagonalFilter, EnergySpectrum, QState, ZERO_POPULATION};

pub use frontier::{
    factorized_filter, frontier_point, optimal_filter, reachable_range, trace_frontier, Family,
    FrontierPoint, DEFAULT_GRID,
};
pub use mixed::{mixed_scan, optimize_mixed_pair, plateau_threshold, MixedScanPoint};
pub use thermal::{thermal_benchmark_state, thermal_beta, thermal_coherence_bound};
pub use tsallis::tsallis_optimal_filter;

/// Energies closer than this form one degeneracy class.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Slack allowed on `P_S` range checks.
pub(crate) const RANGE_SLACK: f64 = 1e-12;
/// Purity deviation accepted for "pure" inputs.
pub(crate) const PURITY_TOL: f64 = 1e-9;

/// Objective a filter is optimized for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterTarget {
    Energy,
    Coherence,
    CoherenceTsallis,
}

impl fmt::Display for FilterTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterTarget::Energy => "energy",
            FilterTarget::Coherence => "coherence",
            FilterTarget::CoherenceTsallis => "tsallis",
        })
    }
}

impl FromStr for FilterTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(FilterTarget::Energy),
            "coherence" => Ok(FilterTarget::Coherence),
            "tsallis" | "coherence_tsallis" | "coherence-tsallis" => {
                Ok(FilterTarget::CoherenceTsallis)
            }
            other => Err(Error::InvalidParameter(format!("unknown target '{other}'"))),
        }
    }
}

/// Two-qubit filter `a|00⟩⟨00| + b(|01⟩⟨01| + |10⟩⟨10|) + |11⟩⟨11|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitFilterParams {
    pub a: f64,
    pub b: f64,
}

impl TwoQubitFilterParams {
    /// Requires `0 ≤ a, b ≤ 1` and `a ≤ b²`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b)] {
            if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if a > b * b + RANGE_SLACK {
            return Err(Error::InvalidParameter(format!(
                "a = {a} exceeds b² = {}; not realizable in this family",
                b * b
            )));
        }
        Ok(Self {
            a: a.clamp(0.0, 1.0),
            b: b.clamp(0.0, 1.0),
        })
    }

    pub fn to_filter(&self) -> DiagonalFilter {
        DiagonalFilter::from_real(&[self.a, self.b, self.b, 1.0])
            .expect("parameters validated in [0, 1]")
    }

    /// Reads `a = |m_00|` and `b = |m_01|` off a two-qubit filter.
    pub fn from_filter(filter: &DiagonalFilter) -> Result<Self> {
        if filter.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: filter.dim(),
            });
        }
        let m = filter.amplitudes();
        Ok(Self { a: m[0], b: m[1] })
    }
}

pub(crate) fn check_success_probability(ps: f64) -> Result<f64> {
    if !ps.is_finite() || ps <= 0.0 {
        return Err(Error::Unreachable {
            requested: ps,
            reason: "success probability must be positive".into(),
        });
    }
    if ps > 1.0 + RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: ps,
            reason: "success probability exceeds 1".into(),
        });
    }
    Ok(ps.min(1.0))
}

fn check_dims(state: &QState, spectrum: &EnergySpectrum) -> Result<()> {
    if state.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            found: state.dim(),
        });
    }
    Ok(())
}

/// Groups level indices into classes of equal energy, lowest energy first.
pub(crate) fn energy_classes(spectrum: &EnergySpectrum) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_energy = f64::NEG_INFINITY;
    for (j, &e) in spectrum.levels().iter().enumerate() {
        match classes.last_mut() {
            Some(class) if e - class_energy <= DEGENERACY_TOL => class.push(j),
            _ => {
                classes.push(vec![j]);
                class_energy = e;
            }
        }
    }
    classes
}

/// Smallest `P_S` reachable by the energy-optimal family: the population of
/// the highest occupied energy class.
pub fn energy_min_success(state: &QState, spectrum: &EnergySpectrum) -> Result<f64> {
    check_dims(state, spectrum)?;
    let pops = state.populations();
    energy_classes(spectrum)
        .iter()
        .rev()
        .map(|class| class_population(class, &pops))
        .find(|&p| p > ZERO_POPULATION)
        .ok_or_else(|| Error::InvalidState("state has no population".into()))
}

fn class_population(class: &[usize], pops: &[f64]) -> f64 {
    class
        .iter()
        .map(|&j| pops[j])
        .filter(|&p| p >= ZERO_POPULATION)
        .sum()
}

/// Filter maximizing the output mean energy at success probability `ps`.
///
/// Levels below the cut energy are removed, levels above it pass unchanged,
/// and the degenerate class at the cut shares one fractional weight.
pub fn energy_optimal_filter(
    state: &QState,
    spectrum: &EnergySpectrum,
    ps: f64,
) -> Result<DiagonalFilter> {
    check_dims(state, spectrum)?;
    let ps = check_success_probability(ps)?;
    let min = energy_min_success(state, spectrum)?;
    if ps < min - RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: ps,
            reason: format!("below the top-class population {min}"),
        });
    }

    if ps >= 1.0 {
        return Ok(DiagonalFilter::identity(state.dim()));
    }
    let pops = state.populations();
    let d = state.dim();
    // Empty levels never affect any objective; keep them open.
    let mut weights: Vec<f64> = pops
        .iter()
        .map(|&p| if p < ZERO_POPULATION { 1.0 } else { 0.0 })
        .collect();

    let mut above = 0.0;
    for class in energy_classes(spectrum).iter().rev() {
        let pop = class_population(class, &pops);
        if pop <= ZERO_POPULATION {
            continue;
        }
        let fraction = if above + pop >= ps {
            ((ps - above) / pop).clamp(0.0, 1.0)
        } else {
            1.0
        };
        for &j in class {
            if pops[j] >= ZERO_POPULATION {
                weights[j] = fraction;
            }
        }
        above += pop;
        if fraction < 1.0 || above >= ps {
            break;
        }
    }
    debug_assert_eq!(weights.len(), d);
    DiagonalFilter::from_weights(&weights)
}

/// Smallest `P_S` reachable by the clipping family: all occupied levels
/// equalized to the smallest population.
pub fn coherence_min_success(state: &QState) -> f64 {
    let occupied: Vec<f64> = state
        .populations()
        .into_iter()
        .filter(|&p| p >= ZERO_POPULATION)
        .collect();
    let p_min = occupied.iter().copied().fold(f64::INFINITY, f64::min);
    occupied.len() as f64 * p_min
}

/// Filter maximizing the relative-entropy coherence of a pure input at
/// success probability `ps`: `M_j = min(K/p_j, 1)`.
pub fn coherence_optimal_filter_pure(state: &QState, ps: f64) -> Result<DiagonalFilter> {
    if !state.is_pure(PURITY_TOL) {
        return Err(Error::NotPure);
    }
    let ps = check_success_probability(ps)?;
    let pops = state.populations();
    let mut occupied: Vec<f64> = pops
        .iter()
        .copied()
        .filter(|&p| p >= ZERO_POPULATION)
        .collect();
    if occupied.len() < 2 {
        return Err(Error::NoCoherence);
    }
    let min = coherence_min_success(state);
    if ps < min - RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: ps,
            reason: format!("below full equalization at {min}"),
        });
    }

    occupied.sort_by(|a, b| b.total_cmp(a));
    let ceiling = clip_level(&occupied, ps.max(min));
    let weights: Vec<f64> = pops
        .iter()
        .map(|&p| {
            if p < ZERO_POPULATION {
                1.0
            } else {
                (ceiling / p).min(1.0)
            }
        })
        .collect();
    DiagonalFilter::from_weights(&weights)
}

/// Solves `Σ_j min(K, q_j) = ps` for `K`, with `q` sorted descending.
fn clip_level(sorted_desc: &[f64], ps: f64) -> f64 {
    let n = sorted_desc.len();
    if ps >= 1.0 {
        return sorted_desc[0];
    }
    let mut tail: f64 = sorted_desc.iter().sum();
    for k in 1..=n {
        // Clip the top k levels; K then lies in [q_{k+1}, q_k].
        tail -= sorted_desc[k - 1];
        let floor = if k < n { sorted_desc[k] } else { 0.0 };
        if ps >= k as f64 * floor + tail {
            return ((ps - tail) / k as f64).min(sorted_desc[k - 1]);
        }
    }
    sorted_desc[n - 1]
}

/// Closed-form optimal `(a, b)` for the pure product state
/// `(√(1−p)|0⟩ + √p|1⟩)^{⊗2}` with `0 < p < 1/2`.
///
/// Energy: `a = √(P_S − P_th)/(1−p), b = 1` above `P_th = p(2−p)`, else
/// `a = 0, b = √((P_S − p²)/(2p(1−p)))` down to `P_S = p²`.
/// Coherence: the same `a` above `P_th + p(1−p)`, else
/// `b = √((P_S − p²)/(3p(1−p))), a = b√(p/(1−p))` down to `P_S = 4p²`.
pub fn two_qubit_closed_form(
    p: f64,
    ps: f64,
    target: FilterTarget,
) -> Result<TwoQubitFilterParams> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "closed forms need 0 < p < 0.5, got {p}"
        )));
    }
    if !ps.is_finite() || ps > 1.0 + RANGE_SLACK {
        return Err(Error::Unreachable {
            requested: ps,
            reason: "P_S above 1".into(),
        });
    }
    let ps = ps.min(1.0);
    let q = 1.0 - p;
    let p_th = p * (2.0 - p);
    let attenuate_ground = |ps: f64| ((ps - p_th).max(0.0)).sqrt() / q;
    let params = match target {
        FilterTarget::Energy => {
            if ps < p * p - RANGE_SLACK {
                return Err(Error::Unreachable {
                    requested: ps,
                    reason: "P_S below p²".into(),
                });
            }
            if ps >= p_th {
                (attenuate_ground(ps), 1.0)
            } else {
                (0.0, ((ps - p * p).max(0.0) / (2.0 * p * q)).sqrt())
            }
        }
        FilterTarget::Coherence => {
            if ps < 4.0 * p * p - RANGE_SLACK {
                return Err(Error::Unreachable {
                    requested: ps,
                    reason: "P_S below 4p²".into(),
                });
            }
            if ps >= p_th + p * q {
                (attenuate_ground(ps), 1.0)
            } else {
                let b = ((ps - p * p).max(0.0) / (3.0 * p * q)).sqrt();
                (b * (p / q).sqrt(), b)
            }
        }
        FilterTarget::CoherenceTsallis => {
            return Err(Error::InvalidParameter(
                "no two-qubit closed form for the Tsallis target".into(),
            ))
        }
    };
    Ok(TwoQubitFilterParams {
        a: params.0.min(1.0),
        b: params.1.min(1.0),
    })
}
