//! Two-photon linear-optical filter and Choi-matrix process metrics.
//!
//! Photon A occupies mode `A0` or `A1`, photon B mode `B0` or `B1`; the
//! qubit value selects the mode. The `0` modes of both photons meet on a
//! coupler, the `1` modes bypass it (or meet on their own coupler when a
//! polarization-dependent splitter is modeled). A coincidence in the
//! original mode pair `(A_j, B_k)` has amplitude given by the permanent of
//! the corresponding 2×2 block of the single-photon transfer matrix.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::DiagonalFilter;
use crate::Complex64;

/// Slack on Choi-matrix positivity and trace checks.
pub const CHOI_TOL: f64 = 1e-10;
/// Reference entries smaller than this carry no usable phase.
pub const PHASE_FLOOR: f64 = 1e-12;

const A0: usize = 0;
const A1: usize = 1;
const B0: usize = 2;
const B1: usize = 3;

/// Partially polarizing splitter: amplitude transmissions of the `1` (H)
/// and `0` (V) modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpbsModel {
    pub t_h: f64,
    pub t_v: f64,
}

impl PpbsModel {
    /// `T_H = 1`, `T_V = 1/3`.
    pub fn standard() -> Self {
        Self {
            t_h: 1.0,
            t_v: (1.0f64 / 3.0).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    /// Intensity transmittance `T` of the `A0`/`B0` coupler. Ignored when
    /// `pbs_model` is set.
    pub bs_transmittance: f64,
    /// Amplitude transmissions of `A0, A1, B0, B1`, applied after coupling.
    pub attenuations: [f64; 4],
    pub pbs_model: Option<PpbsModel>,
}

impl Default for InterferometerSpec {
    fn default() -> Self {
        Self {
            bs_transmittance: 1.0,
            attenuations: [1.0; 4],
            pbs_model: None,
        }
    }
}

impl InterferometerSpec {
    pub fn bare_ppbs() -> Self {
        Self {
            pbs_model: Some(PpbsModel::standard()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut named = vec![("bs_transmittance", self.bs_transmittance)];
        for (name, v) in ["A0", "A1", "B0", "B1"].iter().zip(self.attenuations) {
            named.push((name, v));
        }
        if let Some(m) = self.pbs_model {
            named.push(("t_h", m.t_h));
            named.push(("t_v", m.t_v));
        }
        for (name, v) in named {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Single-photon transfer matrix over modes `(A0, A1, B0, B1)`.
    pub fn transfer_matrix(&self) -> Result<CMatrix> {
        self.validate()?;
        let mut u = CMatrix::identity(4, 4);
        let mut couple = |a: usize, b: usize, t: f64| {
            let r = (1.0 - t * t).max(0.0).sqrt();
            u[(a, a)] = t.into();
            u[(b, b)] = t.into();
            u[(a, b)] = r.into();
            u[(b, a)] = (-r).into();
        };
        match self.pbs_model {
            Some(m) => {
                couple(A0, B0, m.t_v);
                couple(A1, B1, m.t_h);
            }
            None => couple(A0, B0, self.bs_transmittance.sqrt()),
        }
        let att = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            self.attenuations.iter().map(|&g| Complex64::from(g)),
        ));
        Ok(att * u)
    }
}

/// Coincidence amplitude for input `|jk⟩` ending in modes `(A_j, B_k)`.
fn coincidence_amplitude(u: &CMatrix, j: usize, k: usize) -> Complex64 {
    let a = if j == 0 { A0 } else { A1 };
    let b = if k == 0 { B0 } else { B1 };
    u[(a, a)] * u[(b, b)] + u[(a, b)] * u[(b, a)]
}

/// Raw (unnormalized) coincidence amplitudes `(00, 01, 10, 11)`.
pub fn coincidence_amplitudes(spec: &InterferometerSpec) -> Result<[Complex64; 4]> {
    let u = spec.transfer_matrix()?;
    Ok([
        coincidence_amplitude(&u, 0, 0),
        coincidence_amplitude(&u, 0, 1),
        coincidence_amplitude(&u, 1, 0),
        coincidence_amplitude(&u, 1, 1),
    ])
}

/// Effective two-qubit filter and probability factor `P_L`.
///
/// The raw amplitudes equal `√P_L · M`; `M` is scaled so its largest
/// magnitude is 1 and its global phase makes `m_11` real and positive
/// (or the largest entry, if `m_11 = 0`).
pub fn effective_filter(spec: &InterferometerSpec) -> Result<(DiagonalFilter, f64)> {
    let raw = coincidence_amplitudes(spec)?;
    let scale = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale <= PHASE_FLOOR {
        return Err(Error::ZeroSuccess);
    }
    let anchor = if raw[3].norm() > PHASE_FLOOR {
        raw[3]
    } else {
        *raw.iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap()
    };
    let phase = Complex64::from_polar(1.0, -anchor.arg());
    let coeffs = raw
        .iter()
        .map(|z| {
            let m = z * phase / scale;
            // Keep magnitudes ≤ 1 despite rounding.
            if m.norm() > 1.0 {
                m / m.norm()
            } else {
                m
            }
        })
        .collect();
    Ok((DiagonalFilter::new(coeffs)?, scale * scale))
}

/// Phase shifts `φ_j` per basis state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhaseProfile {
    phases: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite phase".into()));
        }
        Ok(Self { phases })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            phases: vec![0.0; dim],
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }
}

impl TryFrom<Vec<f64>> for PhaseProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PhaseProfile> for Vec<f64> {
    fn from(p: PhaseProfile) -> Self {
        p.phases
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Process matrix of a map on a `d`-level system, built from the
/// unnormalized maximally entangled state `Σ_j |j⟩|j⟩` (system first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChoiWire", into = "ChoiWire")]
pub struct ChoiMatrix {
    input_dim: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    /// Validates shape, hermiticity, positivity and `Tr χ ≤ d`.
    pub fn new(input_dim: usize, matrix: CMatrix) -> Result<Self> {
        let n = input_dim * input_dim;
        if input_dim == 0 || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite Choi entry".into()));
        }
        if linalg::hermiticity_defect(&matrix) > CHOI_TOL {
            return Err(Error::InvalidParameter(
                "Choi matrix is not Hermitian".into(),
            ));
        }
        let matrix = linalg::hermitize(&matrix);
        let lowest = linalg::hermitian_eigenvalues(&matrix)[0];
        if lowest < -CHOI_TOL {
            return Err(Error::InvalidParameter(format!(
                "Choi matrix has negative eigenvalue {lowest}"
            )));
        }
        let trace = matrix.trace().re;
        if trace > input_dim as f64 + CHOI_TOL {
            return Err(Error::NotTraceDecreasing(trace / input_dim as f64));
        }
        Ok(Self { input_dim, matrix })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Applies the represented map: `E(ρ)_ab = Σ_ik χ[(a,i),(b,k)] ρ_ik`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let d = self.input_dim;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        Ok(CMatrix::from_fn(d, d, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for k in 0..d {
                    acc += self.matrix[(a * d + i, b * d + k)] * rho[(i, k)];
                }
            }
            acc
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChoiWire {
    dim: usize,
    input_dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<ChoiMatrix> for ChoiWire {
    fn from(c: ChoiMatrix) -> Self {
        let n = c.matrix.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(c.matrix[(i, j)].re);
                im.push(c.matrix[(i, j)].im);
            }
        }
        Self {
            dim: n,
            input_dim: c.input_dim,
            re,
            im,
        }
    }
}

impl TryFrom<ChoiWire> for ChoiMatrix {
    type Error = Error;
    fn try_from(w: ChoiWire) -> Result<Self> {
        let n = w.dim;
        if n != w.input_dim * w.input_dim || w.re.len() != n * n || w.im.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "Choi file: dim {n}, input_dim {}, {} re / {} im entries",
                w.input_dim,
                w.re.len(),
                w.im.len()
            )));
        }
        ChoiMatrix::new(
            w.input_dim,
            CMatrix::from_fn(n, n, |i, j| {
                Complex64::new(w.re[i * n + j], w.im[i * n + j])
            }),
        )
    }
}

/// `χ = v v†` with `v[(j,j)] = m_j e^{iφ_j}`.
pub fn choi_of_filter(
    filter: &DiagonalFilter,
    phases: Option<&PhaseProfile>,
) -> Result<ChoiMatrix> {
    let d = filter.dim();
    let filter = match phases {
        Some(p) if p.dim() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            })
        }
        Some(p) => filter.with_phases(p.phases())?,
        None => filter.clone(),
    };
    let mut v = nalgebra::DVector::<Complex64>::zeros(d * d);
    for (j, m) in filter.coeffs().iter().enumerate() {
        v[j * d + j] = *m;
    }
    let matrix = &v * v.adjoint();
    Ok(ChoiMatrix {
        input_dim: d,
        matrix,
    })
}

/// Purity `Tr χ² / (Tr χ)²` and fidelity `Tr(χ χ_M) / (Tr χ · Tr χ_M)`.
pub fn process_metrics(chi: &ChoiMatrix, chi_ideal: &ChoiMatrix) -> Result<(f64, f64)> {
    if chi.input_dim != chi_ideal.input_dim {
        return Err(Error::DimensionMismatch {
            expected: chi_ideal.input_dim,
            found: chi.input_dim,
        });
    }
    let (t, t_ideal) = (chi.trace(), chi_ideal.trace());
    if t <= PHASE_FLOOR || t_ideal <= PHASE_FLOOR {
        return Err(Error::ZeroSuccess);
    }
    let purity = (&chi.matrix * &chi.matrix).trace().re / (t * t);
    let overlap = (&chi.matrix * &chi_ideal.matrix).trace().re / (t * t_ideal);
    Ok((purity, overlap))
}

/// Removes the relative phases of the diagonal-filter entries
/// `χ[(j,j),(r,r)]`, taking `r = d − 1` as reference unless its weight
/// vanishes (then the largest diagonal entry is used).
pub fn compensate_phases(chi: &ChoiMatrix) -> Result<(ChoiMatrix, PhaseProfile)> {
    let d = chi.input_dim;
    let m = &chi.matrix;
    let diag = |j: usize| m[(j * d + j, j * d + j)].re;
    let mut reference = d - 1;
    if diag(reference) <= PHASE_FLOOR {
        reference = (0..d)
            .max_by(|&a, &b| diag(a).total_cmp(&diag(b)))
            .expect("d ≥ 1");
        if diag(reference) <= PHASE_FLOOR {
            return Err(Error::ZeroSuccess);
        }
    }
    let r = reference * d + reference;
    let phases: Vec<f64> = (0..d)
        .map(|j| {
            let z = m[(j * d + j, r)];
            if z.norm() <= PHASE_FLOOR {
                0.0
            } else {
                wrap_phase(z.arg())
            }
        })
        .collect();
    let correction: Vec<Complex64> = (0..d * d)
        .map(|idx| Complex64::from_polar(1.0, -phases[idx / d]))
        .collect();
    let compensated = linalg::sandwich_diagonal(&correction, m);
    Ok((ChoiMatrix::new(d, compensated)?, PhaseProfile::new(phases)?))
}
