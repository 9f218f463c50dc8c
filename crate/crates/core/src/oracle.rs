//! Brute-force filter search used as an independent check on the
//! synthesizers.
//!
//! The search enumerates every weight vector `M ∈ {0, h, 2h, …, 1}^d`, keeps
//! those whose success probability lies within a tolerance band of the
//! target, and then refines the best one by pairwise coordinate moves that
//! hold `P_S` fixed. Because every candidate is a feasible filter, the
//! reported objective can only undershoot the true optimum.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::{DiagonalFilter, EnergySpectrum, QState};
use crate::synthesis::{FilterTarget, FrontierPoint};

pub const MAX_DIM: usize = 6;
/// Finest step of the refinement stage.
pub const REFINE_STEP: f64 = 1e-6;
/// Largest objective shortfall accepted by [`verify_frontier`].
pub const SHORTFALL_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Refined filter.
    pub filter: DiagonalFilter,
    pub objective: f64,
    pub p_success: f64,
    pub grid_step: f64,
    /// Best grid point before refinement; its weights are multiples of
    /// `grid_step` (or exactly 1).
    pub grid_weights: Vec<f64>,
    pub grid_objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub grid_step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.02,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

/// Objective evaluator over transmission weights `M_j`.
struct Objective<'a> {
    target: FilterTarget,
    pops: Vec<f64>,
    energies: &'a [f64],
    matrix: &'a CMatrix,
    pure: bool,
}

impl<'a> Objective<'a> {
    fn new(state: &'a QState, spectrum: &'a EnergySpectrum, target: FilterTarget) -> Self {
        Self {
            target,
            pops: state.populations(),
            energies: spectrum.levels(),
            matrix: state.matrix(),
            pure: state.is_pure(1e-12),
        }
    }

    fn success(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.pops).map(|(w, p)| w * p).sum()
    }

    /// Objective of the normalized output, or `None` if nothing survives.
    fn eval(&self, w: &[f64]) -> Option<f64> {
        let ps = self.success(w);
        if ps <= 1e-300 {
            return None;
        }
        let value = match self.target {
            FilterTarget::Energy => {
                w.iter()
                    .zip(&self.pops)
                    .zip(self.energies)
                    .map(|((w, p), e)| w * p * e)
                    .sum::<f64>()
                    / ps
            }
            FilterTarget::Coherence => {
                let q: Vec<f64> = w.iter().zip(&self.pops).map(|(w, p)| w * p / ps).collect();
                let diagonal_entropy = linalg::shannon_entropy(&q);
                if self.pure {
                    diagonal_entropy
                } else {
                    let amps: Vec<crate::Complex64> =
                        w.iter().map(|w| (w.sqrt() / ps.sqrt()).into()).collect();
                    let out = linalg::sandwich_diagonal(&amps, self.matrix);
                    diagonal_entropy - linalg::von_neumann_entropy(&out)
                }
            }
            FilterTarget::CoherenceTsallis => {
                let d = w.len();
                let mut off = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            off += w[i] * w[j] * self.matrix[(i, j)].norm_sqr();
                        }
                    }
                }
                off / (ps * ps)
            }
        };
        Some(value)
    }
}

#[derive(Clone)]
struct Best {
    value: f64,
    index: Vec<usize>,
}

/// Higher objective wins; near-ties go to the lexicographically smaller
/// grid index so the parallel reduction is order independent.
fn better(a: Best, b: Best) -> Best {
    if (a.value - b.value).abs() <= 1e-15 {
        if a.index.cmp(&b.index) != Ordering::Greater {
            a
        } else {
            b
        }
    } else if a.value > b.value {
        a
    } else {
        b
    }
}

struct Search<'a> {
    objective: &'a Objective<'a>,
    values: &'a [f64],
    suffix: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Search<'_> {
    fn descend(&self, level: usize, partial: f64, index: &mut Vec<usize>, best: &mut Option<Best>) {
        let d = self.suffix.len() - 1;
        if level == d {
            if partial < self.lo || partial > self.hi {
                return;
            }
            let w: Vec<f64> = index.iter().map(|&k| self.values[k]).collect();
            if let Some(value) = self.objective.eval(&w) {
                let cand = Best {
                    value,
                    index: index.clone(),
                };
                *best = Some(match best.take() {
                    Some(b) => better(b, cand),
                    None => cand,
                });
            }
            return;
        }
        let p = self.objective.pops[level];
        for (k, &v) in self.values.iter().enumerate() {
            let next = partial + v * p;
            if next > self.hi {
                break;
            }
            if next + self.suffix[level + 1] < self.lo {
                continue;
            }
            index.push(k);
            self.descend(level + 1, next, index, best);
            index.pop();
        }
    }
}

fn grid_values(step: f64) -> Vec<f64> {
    let n = (1.0 / step + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if *values.last().unwrap() < 1.0 - 1e-12 {
        values.push(1.0);
    } else {
        *values.last_mut().unwrap() = 1.0;
    }
    values
}

/// Exhaustive grid search followed by constrained refinement.
pub fn grid_search(
    state: &QState,
    spectrum: &EnergySpectrum,
    target: FilterTarget,
    p_success: f64,
    grid_step: f64,
    tolerance: f64,
) -> Result<OracleResult> {
    let d = state.dim();
    if spectrum.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            found: d,
        });
    }
    if d > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "grid search supports d ≤ {MAX_DIM}, got {d}"
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "grid step {grid_step} outside (0, 0.5]"
        )));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    if !(p_success > 0.0 && p_success <= 1.0 + 1e-12) {
        return Err(Error::Unreachable {
            requested: p_success,
            reason: "success probability must lie in (0, 1]".into(),
        });
    }

    let objective = Objective::new(state, spectrum, target);
    let values = grid_values(grid_step);
    let mut suffix = vec![0.0; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1] + objective.pops[j];
    }
    let search = Search {
        objective: &objective,
        values: &values,
        suffix,
        lo: p_success - tolerance,
        hi: p_success + tolerance,
    };

    let best = (0..values.len())
        .into_par_iter()
        .filter_map(|k| {
            let first = values[k] * objective.pops[0];
            if first > search.hi {
                return None;
            }
            let mut index = vec![k];
            let mut best = None;
            search.descend(1, first, &mut index, &mut best);
            best
        })
        .reduce_with(better)
        .ok_or(Error::Infeasible {
            target: p_success,
            tolerance,
        })?;

    let grid_weights: Vec<f64> = best.index.iter().map(|&k| values[k]).collect();
    let refined = refine(&objective, grid_weights.clone(), p_success, grid_step);
    let value = objective.eval(&refined).expect("refinement keeps P_S > 0");
    Ok(OracleResult {
        filter: DiagonalFilter::from_weights(&refined)?,
        objective: value,
        p_success: objective.success(&refined),
        grid_step,
        grid_weights,
        grid_objective: best.value,
    })
}

/// Moves one coordinate so that `P_S` hits the target exactly, preferring
/// fractional coordinates with the largest population.
fn project(objective: &Objective, w: &mut [f64], target: f64) {
    let gap = target - objective.success(w);
    if gap == 0.0 {
        return;
    }
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| objective.pops[j] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let frac = |j: usize| w[j] > 0.0 && w[j] < 1.0;
        frac(b)
            .cmp(&frac(a))
            .then(objective.pops[b].total_cmp(&objective.pops[a]))
    });
    for j in order {
        let moved = w[j] + gap / objective.pops[j];
        if (0.0..=1.0).contains(&moved) {
            w[j] = moved;
            return;
        }
    }
}

/// Pairwise coordinate ascent at fixed `P_S` with step halving.
fn refine(objective: &Objective, mut w: Vec<f64>, target: f64, start: f64) -> Vec<f64> {
    project(objective, &mut w, target);
    let d = w.len();
    let pops = &objective.pops;
    let mut current = objective.eval(&w).unwrap_or(f64::NEG_INFINITY);
    let mut step = start;
    while step >= REFINE_STEP {
        for _ in 0..100_000 {
            let mut improved = false;
            for i in 0..d {
                for j in 0..d {
                    if i == j || pops[j] <= 0.0 {
                        continue;
                    }
                    for sign in [1.0, -1.0] {
                        let wi = (w[i] + sign * step).clamp(0.0, 1.0);
                        let wj = w[j] - (wi - w[i]) * pops[i] / pops[j];
                        if wi == w[i] || !(0.0..=1.0).contains(&wj) {
                            continue;
                        }
                        let mut trial = w.clone();
                        trial[i] = wi;
                        trial[j] = wj;
                        if let Some(v) = objective.eval(&trial) {
                            if v > current + 1e-15 {
                                w = trial;
                                current = v;
                                improved = true;
                            }
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 2.0;
    }
    w
}

/// Outcome of re-checking one frontier point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub index: usize,
    pub p_success: f64,
    pub synthesized: f64,
    pub oracle: f64,
    /// `oracle − synthesized`; positive means the oracle found better.
    pub shortfall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub checks: Vec<SampleCheck>,
    pub max_shortfall: f64,
    pub pass: bool,
}

/// Objective a frontier point scores for `target`.
pub fn point_objective(point: &FrontierPoint, target: FilterTarget) -> f64 {
    match target {
        FilterTarget::Energy => point.mean_energy,
        FilterTarget::Coherence => point.coherence,
        FilterTarget::CoherenceTsallis => point.coherence_tsallis,
    }
}

/// Re-runs the grid search at `samples` randomly chosen frontier points
/// (all of them if fewer) and reports the worst shortfall.
pub fn verify_frontier(
    points: &[FrontierPoint],
    state: &QState,
    spectrum: &EnergySpectrum,
    target: FilterTarget,
    samples: usize,
    config: &OracleConfig,
) -> Result<FrontierReport> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty frontier".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut picked: Vec<usize> = if samples >= points.len() {
        (0..points.len()).collect()
    } else {
        rand::seq::index::sample(&mut rng, points.len(), samples).into_vec()
    };
    picked.sort_unstable();

    let checks = picked
        .into_iter()
        .map(|index| {
            let point = &points[index];
            let found = grid_search(
                state,
                spectrum,
                target,
                point.p_success,
                config.grid_step,
                config.tolerance,
            )?;
            let synthesized = point_objective(point, target);
            Ok(SampleCheck {
                index,
                p_success: point.p_success,
                synthesized,
                oracle: found.objective,
                shortfall: found.objective - synthesized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_shortfall = checks
        .iter()
        .map(|c| c.shortfall)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FrontierReport {
        pass: max_shortfall <= SHORTFALL_TOL,
        max_shortfall,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{coherence, mixed_qubit_product, product_pure_state, QubitParams};
    use crate::synthesis::{frontier_point, trace_frontier, Family};
    use approx::assert_abs_diff_eq;

    fn psi() -> QState {
        product_pure_state(0.1, 2).unwrap()
    }

    #[test]
    fn grid_includes_both_ends() {
        assert_eq!(grid_values(0.5), vec![0.0, 0.5, 1.0]);
        let v = grid_values(0.3);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert_eq!(v.len(), 5);
        assert_eq!(grid_values(0.02).len(), 51);
    }

    #[test]
    fn energy_boundary_point() {
        let spec = EnergySpectrum::two_qubit();
        let r = grid_search(&psi(), &spec, FilterTarget::Energy, 0.19, 0.02, 1e-3).unwrap();
        assert_abs_diff_eq!(r.objective, 0.2 / 0.19, epsilon = 1e-3);
        assert_abs_diff_eq!(r.p_success, 0.19, epsilon = 1e-12);
        for w in &r.grid_weights {
            let k = w / 0.02;
            assert!((k - k.round()).abs() < 1e-9 || *w == 1.0);
        }
    }

    #[test]
    fn full_success_is_identity() {
        let spec = EnergySpectrum::two_qubit();
        for target in [FilterTarget::Energy, FilterTarget::Coherence] {
            let r = grid_search(&psi(), &spec, target, 1.0, 0.02, 1e-3).unwrap();
            for w in r.filter.weights() {
                assert_abs_diff_eq!(w, 1.0, epsilon = 1e-9);
            }
        }
        let r = grid_search(&psi(), &spec, FilterTarget::Coherence, 1.0, 0.02, 1e-3).unwrap();
        assert_abs_diff_eq!(r.objective, coherence(&psi()), epsilon = 1e-9);
    }

    #[test]
    fn equalization_point() {
        let spec = EnergySpectrum::two_qubit();
        let r = grid_search(&psi(), &spec, FilterTarget::Coherence, 0.04, 0.02, 1e-3).unwrap();
        assert_abs_diff_eq!(r.objective, 4f64.ln(), epsilon = 1e-3);
        assert!(r.objective <= 4f64.ln() + 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let spec = EnergySpectrum::two_qubit();
        assert!(grid_search(&psi(), &spec, FilterTarget::Energy, 0.5, 0.0, 1e-3).is_err());
        assert!(grid_search(&psi(), &spec, FilterTarget::Energy, 0.5, 0.6, 1e-3).is_err());
        assert!(grid_search(&psi(), &spec, FilterTarget::Energy, 0.5, 0.02, 0.0).is_err());
        // Grid 0.5 only offers P_S values far from 0.123.
        assert!(matches!(
            grid_search(&psi(), &spec, FilterTarget::Energy, 0.123, 0.5, 1e-6),
            Err(Error::Infeasible { .. })
        ));
        let big = QState::diagonal(&[0.125; 8]).unwrap();
        let spec8 = EnergySpectrum::new((0..8).map(f64::from).collect()).unwrap();
        assert!(grid_search(&big, &spec8, FilterTarget::Energy, 0.5, 0.1, 1e-3).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = EnergySpectrum::two_qubit();
        let mixed = mixed_qubit_product(QubitParams::new(0.2, 0.75).unwrap(), 2).unwrap();
        let a = grid_search(&mixed, &spec, FilterTarget::Coherence, 0.3, 0.05, 1e-3).unwrap();
        let b = grid_search(&mixed, &spec, FilterTarget::Coherence, 0.3, 0.05, 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_frontier_has_no_shortfall() {
        let spec = EnergySpectrum::two_qubit();
        let point =
            frontier_point(&psi(), &spec, DiagonalFilter::identity(4), Family::Optimal).unwrap();
        let report = verify_frontier(
            &[point],
            &psi(),
            &spec,
            FilterTarget::Coherence,
            1,
            &OracleConfig::default(),
        )
        .unwrap();
        assert!(report.pass);
        assert!(report.max_shortfall.abs() < 1e-9);
    }

    #[test]
    fn optimal_coherence_frontier_passes() {
        let spec = EnergySpectrum::two_qubit();
        let frontier =
            trace_frontier(&psi(), &spec, FilterTarget::Coherence, Family::Optimal, 200).unwrap();
        let config = OracleConfig::default();
        let report = verify_frontier(
            &frontier,
            &psi(),
            &spec,
            FilterTarget::Coherence,
            10,
            &config,
        )
        .unwrap();
        assert_eq!(report.checks.len(), 10);
        assert!(report.pass, "{report:?}");
        let again = verify_frontier(
            &frontier,
            &psi(),
            &spec,
            FilterTarget::Coherence,
            10,
            &config,
        )
        .unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn tsallis_mixed_matches_oracle() {
        let spec = EnergySpectrum::two_qubit();
        let mixed = mixed_qubit_product(QubitParams::new(0.2, 0.75).unwrap(), 2).unwrap();
        let filter = crate::synthesis::tsallis_optimal_filter(&mixed, 0.3).unwrap();
        let (out, ps) = crate::state::apply_filter(&mixed, &filter).unwrap();
        assert_abs_diff_eq!(ps, 0.3, epsilon = 1e-10);
        let found = grid_search(
            &mixed,
            &spec,
            FilterTarget::CoherenceTsallis,
            0.3,
            0.02,
            1e-3,
        )
        .unwrap();
        let synthesized = crate::state::coherence_tsallis(&out);
        assert_abs_diff_eq!(found.objective, synthesized, epsilon = 1e-4);
        assert!(found.objective <= synthesized + 1e-9);
    }

    #[test]
    fn perturbed_filter_fails() {
        let spec = EnergySpectrum::two_qubit();
        // Optimal at P_S = 0.28 is (1/3, 1, 1, 1); lower the |11⟩ amplitude by 0.1.
        let filter = DiagonalFilter::from_real(&[1.0 / 3.0, 1.0, 1.0, 0.9]).unwrap();
        let point = frontier_point(&psi(), &spec, filter, Family::Optimal).unwrap();
        let report = verify_frontier(
            &[point],
            &psi(),
            &spec,
            FilterTarget::Coherence,
            1,
            &OracleConfig::default(),
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.max_shortfall > SHORTFALL_TOL);
    }
}
