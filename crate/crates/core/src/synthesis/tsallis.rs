//! Tsallis-coherence optimal filters for arbitrary (mixed) inputs.
//!
//! At fixed `P_S` the output Tsallis coherence is `Σ_{j≠k} M_j M_k |ρ_jk|² / P_S²`.
//! Every maximizer pins some weights to 0 or 1 and makes the remaining ones
//! stationary, `2 Σ_k |ρ_jk|² M_k − 2ρ_jj² M_j = λ ρ_jj`. For a fixed pattern
//! of pinned weights this is linear in `(M_free, λ)` once the `P_S`
//! constraint is appended, so every pattern is solved exactly and the best
//! feasible candidate wins.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::{DiagonalFilter, QState, ZERO_POPULATION};

use super::{check_success_probability, RANGE_SLACK};

/// Largest number of occupied levels enumerated (3^n patterns).
const MAX_LEVELS: usize = 12;
const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pin {
    Zero,
    One,
    Free,
}

/// Filter maximizing `Tr ρ_out² − Tr ρ_D,out²` at success probability `ps`.
pub fn tsallis_optimal_filter(state: &QState, ps: f64) -> Result<DiagonalFilter> {
    let ps = check_success_probability(ps)?;
    if state.is_diagonal(1e-12) {
        return Err(Error::NoCoherence);
    }
    let d = state.dim();
    let pops = state.populations();
    let active: Vec<usize> = (0..d).filter(|&j| pops[j] >= ZERO_POPULATION).collect();
    let n = active.len();
    if n > MAX_LEVELS {
        return Err(Error::InvalidParameter(format!(
            "{n} occupied levels exceed the enumeration limit {MAX_LEVELS}"
        )));
    }

    let mut weights = vec![1.0; d];
    if ps < 1.0 {
        let p: Vec<f64> = active.iter().map(|&j| pops[j]).collect();
        let coupling = DMatrix::from_fn(n, n, |a, b| {
            if a == b {
                0.0
            } else {
                state.matrix()[(active[a], active[b])].norm_sqr()
            }
        });
        let best = best_candidate(&coupling, &p, ps).ok_or(Error::Unreachable {
            requested: ps,
            reason: "no feasible stationary point".into(),
        })?;
        for (a, &j) in active.iter().enumerate() {
            weights[j] = best[a];
        }
    }
    DiagonalFilter::from_weights(&weights)
}

fn objective(coupling: &DMatrix<f64>, m: &[f64]) -> f64 {
    let v = DVector::from_column_slice(m);
    v.dot(&(coupling * &v))
}

fn best_candidate(coupling: &DMatrix<f64>, p: &[f64], ps: f64) -> Option<Vec<f64>> {
    let n = p.len();
    let mut pins = vec![Pin::Zero; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        if let Some(m) = solve_pattern(coupling, p, ps, &pins) {
            let value = objective(coupling, &m);
            if best.as_ref().is_none_or(|(b, _)| value > b + 1e-15) {
                best = Some((value, m));
            }
        }
        if !advance(&mut pins) {
            break;
        }
    }
    best.map(|(_, m)| m)
}

/// Odometer over {Zero, One, Free}^n in lexicographic order.
fn advance(pins: &mut [Pin]) -> bool {
    for pin in pins.iter_mut().rev() {
        match pin {
            Pin::Zero => {
                *pin = Pin::One;
                return true;
            }
            Pin::One => {
                *pin = Pin::Free;
                return true;
            }
            Pin::Free => *pin = Pin::Zero,
        }
    }
    false
}

fn solve_pattern(coupling: &DMatrix<f64>, p: &[f64], ps: f64, pins: &[Pin]) -> Option<Vec<f64>> {
    let n = p.len();
    let mut m: Vec<f64> = pins
        .iter()
        .map(|pin| if *pin == Pin::One { 1.0 } else { 0.0 })
        .collect();
    let pinned_ps: f64 = (0..n).map(|j| m[j] * p[j]).sum();
    let free: Vec<usize> = (0..n).filter(|&j| pins[j] == Pin::Free).collect();
    if free.is_empty() {
        return ((pinned_ps - ps).abs() <= RANGE_SLACK).then_some(m);
    }

    // Unknowns: M_free, then λ.
    let f = free.len();
    let mut system = DMatrix::<f64>::zeros(f + 1, f + 1);
    let mut rhs = DVector::<f64>::zeros(f + 1);
    for (row, &j) in free.iter().enumerate() {
        for (col, &k) in free.iter().enumerate() {
            system[(row, col)] = 2.0 * coupling[(j, k)];
        }
        system[(row, f)] = -p[j];
        rhs[row] = -2.0 * (0..n).map(|k| coupling[(j, k)] * m[k]).sum::<f64>();
        system[(f, row)] = p[j];
    }
    rhs[f] = ps - pinned_ps;

    let solution = match system.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => {
            let x = system.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
            let residual = (&system * &x - &rhs).amax();
            if residual > 1e-9 {
                return None;
            }
            x
        }
    };
    for (row, &j) in free.iter().enumerate() {
        let w = solution[row];
        if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&w) {
            return None;
        }
        m[j] = w.clamp(0.0, 1.0);
    }
    Some(m)
}
