//! Pure states with Gibbs-distributed populations: the largest coherence a
//! state can have at a given mean energy.

use crate::error::{Error, Result};
use crate::linalg::shannon_entropy;
use crate::state::{EnergySpectrum, QState};

use super::energy_classes;

/// Gibbs weights `e^{−βE_j}/Z`, shifted for overflow safety.
fn gibbs(spectrum: &EnergySpectrum, beta: f64) -> Vec<f64> {
    let shift = if beta >= 0.0 {
        spectrum.min()
    } else {
        spectrum.max()
    };
    let w: Vec<f64> = spectrum
        .levels()
        .iter()
        .map(|e| (-beta * (e - shift)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn gibbs_energy(spectrum: &EnergySpectrum, beta: f64) -> f64 {
    gibbs(spectrum, beta)
        .iter()
        .zip(spectrum.levels())
        .map(|(w, e)| w * e)
        .sum()
}

fn check_open_interval(spectrum: &EnergySpectrum, mean_energy: f64) -> Result<()> {
    if !(mean_energy > spectrum.min() && mean_energy < spectrum.max()) {
        return Err(Error::InvalidParameter(format!(
            "mean energy {mean_energy} outside the open interval ({}, {})",
            spectrum.min(),
            spectrum.max()
        )));
    }
    Ok(())
}

/// Inverse temperature whose Gibbs distribution has the given mean energy.
///
/// The Gibbs mean energy is strictly decreasing in `β` on the whole real
/// line, so a bracketed bisection converges to the unique root.
pub fn thermal_beta(spectrum: &EnergySpectrum, mean_energy: f64) -> Result<f64> {
    check_open_interval(spectrum, mean_energy)?;
    let f = |beta: f64| gibbs_energy(spectrum, beta) - mean_energy;

    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) < 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::InvalidParameter(
                "mean energy too close to the maximum".into(),
            ));
        }
    }
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter(
                "mean energy too close to the minimum".into(),
            ));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Σ_j e^{−βE_j/2}/√Z |j⟩` with `β` fixed by the mean energy.
pub fn thermal_benchmark_state(spectrum: &EnergySpectrum, mean_energy: f64) -> Result<QState> {
    let beta = thermal_beta(spectrum, mean_energy)?;
    let amps: Vec<f64> = gibbs(spectrum, beta).into_iter().map(f64::sqrt).collect();
    QState::pure_real(&amps)
}

/// Coherence of the thermal benchmark state, extended to the closed
/// interval: at the spectrum edges it tends to `ln g` with `g` the edge
/// degeneracy.
pub fn thermal_coherence_bound(spectrum: &EnergySpectrum, mean_energy: f64) -> Result<f64> {
    let classes = energy_classes(spectrum);
    let tol = super::DEGENERACY_TOL;
    if (mean_energy - spectrum.min()).abs() <= tol {
        return Ok((classes[0].len() as f64).ln());
    }
    if (mean_energy - spectrum.max()).abs() <= tol {
        return Ok((classes[classes.len() - 1].len() as f64).ln());
    }
    let beta = thermal_beta(spectrum, mean_energy)?;
    Ok(shannon_entropy(&gibbs(spectrum, beta)))
}
