//! Mixed product inputs `ρ ⊗ ρ` filtered with `a = 0` and an optimized `b`.
//!
//! Within this family the normalized output depends on `p` and `b` only
//! through `b²(1−p)/p`, so the coherence optimum is flat in `p` until the
//! optimal `b` reaches 1. Beyond that threshold `b = 1` is optimal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{
    apply_filter, coherence, mean_energy, mixed_qubit_product, DiagonalFilter, EnergySpectrum,
    QState, QubitParams,
};

const GOLDEN_TOL: f64 = 1e-8;

/// Optimized `a = 0` filtering of one mixed product input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedScanPoint {
    pub p: f64,
    pub eta: f64,
    pub coherence: f64,
    pub mean_energy: f64,
    pub b_opt: f64,
    pub input_coherence: f64,
    pub input_energy: f64,
}

fn check_params(p: f64, eta: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
    }
    QubitParams::new(p, eta).map(|_| ())
}

fn a_zero_filter(b: f64) -> DiagonalFilter {
    DiagonalFilter::from_real(&[0.0, b, b, 1.0]).expect("b in [0, 1]")
}

fn output_coherence(state: &QState, b: f64) -> f64 {
    apply_filter(state, &a_zero_filter(b))
        .map(|(out, _)| coherence(&out))
        .unwrap_or(0.0)
}

/// Golden-section maximization on `[0, 1]`, then the endpoint `b = 1` is
/// preferred whenever it is at least as good.
fn maximize_b(state: &QState) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |b: f64| output_coherence(state, b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let b = 0.5 * (lo + hi);
    if f(1.0) >= f(b) {
        1.0
    } else {
        b
    }
}

/// Builds `ρ ⊗ ρ` for `(p, η)` and maximizes the output coherence over
/// filters `diag(0, b, b, 1)`.
pub fn optimize_mixed_pair(eta: f64, p: f64) -> Result<MixedScanPoint> {
    check_params(p, eta)?;
    let spectrum = EnergySpectrum::two_qubit();
    let input = mixed_qubit_product(QubitParams::new(p, eta)?, 2)?;
    let b_opt = if input.is_diagonal(1e-15) {
        // Nothing to enhance: every b gives zero coherence.
        1.0
    } else {
        maximize_b(&input)
    };
    let (out, _) = apply_filter(&input, &a_zero_filter(b_opt))?;
    Ok(MixedScanPoint {
        p,
        eta,
        coherence: coherence(&out),
        mean_energy: mean_energy(&out, &spectrum)?,
        b_opt,
        input_coherence: coherence(&input),
        input_energy: mean_energy(&input, &spectrum)?,
    })
}

/// Runs [`optimize_mixed_pair`] for every `p`, in parallel, in input order.
pub fn mixed_scan(eta: f64, p_values: &[f64]) -> Result<Vec<MixedScanPoint>> {
    QubitParams::new(0.5, eta)?;
    p_values
        .par_iter()
        .map(|&p| optimize_mixed_pair(eta, p))
        .collect()
}

/// Smallest `p` at which the optimal `b` saturates at 1, located by
/// bisection. `None` when the input carries no coherence (`η = 0`) or no
/// saturation occurs inside `(0, 1)`.
pub fn plateau_threshold(eta: f64) -> Result<Option<f64>> {
    QubitParams::new(0.5, eta)?;
    if eta == 0.0 {
        return Ok(None);
    }
    let saturated = |p: f64| optimize_mixed_pair(eta, p).map(|pt| pt.b_opt >= 1.0);
    let (mut lo, mut hi) = (1e-3, 1.0 - 1e-3);
    if saturated(lo)? || !saturated(hi)? {
        return Ok(None);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if saturated(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
