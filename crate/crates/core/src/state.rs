//! States, spectra, diagonal filters and the measures defined on them.
//!
//! Everything here is an immutable value. Operations return new values and
//! never mutate their inputs. Entropies are in nats.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_FLOOR: f64 = -1e-10;
pub const FILTER_TOL: f64 = 1e-12;
/// Populations below this are treated as empty levels.
pub const ZERO_POPULATION: f64 = 1e-14;

/// Energy eigenvalues of the incoherent basis, in nondecreasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EnergySpectrum {
    levels: Vec<f64>,
}

impl EnergySpectrum {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidSpectrum(format!(
                "need at least two levels, got {}",
                levels.len()
            )));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite energy".into()));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpectrum(
                "energies must be in nondecreasing order".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// Single two-level system with unit gap.
    pub fn qubit() -> Self {
        Self {
            levels: vec![0.0, 1.0],
        }
    }

    /// Pair of two-level systems with unit gap: `(0, 1, 1, 2)`.
    pub fn two_qubit() -> Self {
        Self {
            levels: vec![0.0, 1.0, 1.0, 2.0],
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }
}

impl Default for EnergySpectrum {
    fn default() -> Self {
        Self::two_qubit()
    }
}

impl TryFrom<Vec<f64>> for EnergySpectrum {
    type Error = Error;
    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<EnergySpectrum> for Vec<f64> {
    fn from(s: EnergySpectrum) -> Self {
        s.levels
    }
}

/// Density matrix of a `d`-level system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixWire", into = "MatrixWire")]
pub struct QState {
    matrix: CMatrix,
}

impl QState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidState(format!(
                "matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {defect:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let matrix = linalg::hermitize(&matrix);
        let min_ev = linalg::hermitian_eigenvalues(&matrix)[0];
        if min_ev < PSD_FLOOR {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (eigenvalue {min_ev:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Internal constructor for matrices that are valid by construction.
    pub(crate) fn from_valid(matrix: CMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self {
            matrix: linalg::hermitize(&matrix),
        }
    }

    /// Pure state `|ψ⟩⟨ψ|`; the amplitudes are normalized first.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState("zero or empty amplitude vector".into()));
        }
        let psi: Vec<Complex64> = amplitudes.iter().map(|c| c / norm).collect();
        let d = psi.len();
        Ok(Self::from_valid(CMatrix::from_fn(d, d, |i, j| {
            psi[i] * psi[j].conj()
        })))
    }

    pub fn pure_real(amplitudes: &[f64]) -> Result<Self> {
        let amps: Vec<Complex64> = amplitudes.iter().map(|&a| a.into()).collect();
        Self::pure(&amps)
    }

    /// Diagonal (incoherent) state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            populations.len(),
            populations.iter().map(|&p| Complex64::from(p)),
        )))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Diagonal elements `ρ_jj`.
    pub fn populations(&self) -> Vec<f64> {
        linalg::real_diagonal(&self.matrix)
    }

    /// Eigenvalues, ascending, with tiny negatives clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
            .into_iter()
            .map(|e| e.max(0.0))
            .collect()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity() - 1.0).abs() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.matrix[(i, j)].norm() <= tol))
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        linalg::shannon_entropy(&self.eigenvalues())
    }
}

/// Diagonal Kraus operator `M = Σ m_j |j⟩⟨j|` with `|m_j| ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorWire", into = "VectorWire")]
pub struct DiagonalFilter {
    coeffs: Vec<Complex64>,
}

impl DiagonalFilter {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidFilter("empty coefficient list".into()));
        }
        for (j, m) in coeffs.iter().enumerate() {
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::InvalidFilter(format!(
                    "coefficient {j} is not finite"
                )));
            }
            if m.norm() > 1.0 + FILTER_TOL {
                return Err(Error::InvalidFilter(format!(
                    "|m_{j}| = {} exceeds 1",
                    m.norm()
                )));
            }
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&m| m.into()).collect())
    }

    /// Filter with nonnegative amplitudes `m_j = √M_j`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidFilter(format!("negative weight {w}")));
        }
        Self::new(weights.iter().map(|&w| w.sqrt().into()).collect())
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(1.0, 0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Magnitudes `|m_j|`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|m| m.norm()).collect()
    }

    /// Transmission weights `M_j = |m_j|²`.
    pub fn weights(&self) -> Vec<f64> {
        self.coeffs.iter().map(|m| m.norm_sqr()).collect()
    }

    /// Filter equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &DiagonalFilter) -> Result<DiagonalFilter> {
        check_dims(self.dim(), next.dim())?;
        Ok(DiagonalFilter {
            coeffs: self
                .coeffs
                .iter()
                .zip(&next.coeffs)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Multiply each coefficient by `e^{iφ_j}`.
    pub fn with_phases(&self, phases: &[f64]) -> Result<DiagonalFilter> {
        check_dims(self.dim(), phases.len())?;
        Ok(DiagonalFilter {
            coeffs: self
                .coeffs
                .iter()
                .zip(phases)
                .map(|(m, &phi)| m * Complex64::from_polar(1.0, phi))
                .collect(),
        })
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.coeffs))
    }
}

impl fmt::Display for DiagonalFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "diag(")?;
        for (j, m) in self.coeffs.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            if m.im == 0.0 {
                write!(f, "{:.6}", m.re)?;
            } else {
                write!(f, "{:.6}{:+.6}i", m.re, m.im)?;
            }
        }
        write!(f, ")")
    }
}

/// Single-qubit parameters of the state
/// `[[1-p, η√(p(1-p))], [η√(p(1-p)), p]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub p: f64,
    pub eta: f64,
}

impl QubitParams {
    pub fn new(p: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "eta = {eta} outside [0, 1]"
            )));
        }
        Ok(Self { p, eta })
    }

    pub fn density_matrix(&self) -> CMatrix {
        let (p, eta) = (self.p, self.eta);
        let off = Complex64::from(eta * (p * (1.0 - p)).sqrt());
        CMatrix::from_row_slice(2, 2, &[(1.0 - p).into(), off, off, p.into()])
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `ρ_D`: the state with all off-diagonal elements removed.
pub fn dephase(state: &QState) -> QState {
    let d = state.dim();
    QState {
        matrix: CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                state.matrix[(i, i)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }),
    }
}

/// `Ē = Σ_j E_j ρ_jj`.
pub fn mean_energy(state: &QState, spectrum: &EnergySpectrum) -> Result<f64> {
    check_dims(spectrum.dim(), state.dim())?;
    Ok(spectrum
        .levels()
        .iter()
        .zip(state.populations())
        .map(|(e, p)| e * p)
        .sum())
}

/// Relative-entropy coherence `S(ρ_D) − S(ρ)` in nats.
pub fn coherence(state: &QState) -> f64 {
    let c = linalg::shannon_entropy(&state.populations()) - state.von_neumann_entropy();
    c.max(0.0)
}

/// Tsallis-2 coherence `Tr ρ² − Tr ρ_D²`.
pub fn coherence_tsallis(state: &QState) -> f64 {
    let d = state.dim();
    let mut off = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off += state.matrix[(i, j)].norm_sqr();
            }
        }
    }
    off
}

/// `P_S = Σ_j |m_j|² ρ_jj`.
pub fn success_probability(state: &QState, filter: &DiagonalFilter) -> Result<f64> {
    check_dims(state.dim(), filter.dim())?;
    Ok(filter
        .weights()
        .iter()
        .zip(state.populations())
        .map(|(w, p)| w * p)
        .sum())
}

/// Returns the normalized output `MρM†/P_S` and `P_S`.
pub fn apply_filter(state: &QState, filter: &DiagonalFilter) -> Result<(QState, f64)> {
    let ps = success_probability(state, filter)?;
    if ps <= ZERO_POPULATION {
        return Err(Error::ZeroSuccess);
    }
    let out = linalg::sandwich_diagonal(filter.coeffs(), &state.matrix).unscale(ps);
    Ok((QState::from_valid(out), ps))
}

/// `(√(1−p)|0⟩ + √p|1⟩)^{⊗n}`.
pub fn product_pure_state(p: f64, n_qubits: usize) -> Result<QState> {
    let params = QubitParams::new(p, 1.0)?;
    mixed_qubit_product(params, n_qubits)
}

/// n-fold tensor power of the single-qubit state described by `params`.
pub fn mixed_qubit_product(params: QubitParams, n_qubits: usize) -> Result<QState> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    let single = params.density_matrix();
    let mut m = single.clone();
    for _ in 1..n_qubits {
        m = linalg::kron(&m, &single);
    }
    Ok(QState::from_valid(m))
}

pub fn tensor(a: &QState, b: &QState) -> QState {
    QState::from_valid(linalg::kron(&a.matrix, &b.matrix))
}

pub fn tensor_filter(a: &DiagonalFilter, b: &DiagonalFilter) -> DiagonalFilter {
    DiagonalFilter {
        coeffs: a
            .coeffs
            .iter()
            .flat_map(|x| b.coeffs.iter().map(move |y| x * y))
            .collect(),
    }
}

/// Interchange form: row-major real and imaginary parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatrixWire {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<QState> for MatrixWire {
    fn from(s: QState) -> Self {
        let d = s.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(s.matrix[(i, j)].re);
                im.push(s.matrix[(i, j)].im);
            }
        }
        Self { dim: d, re, im }
    }
}

impl TryFrom<MatrixWire> for QState {
    type Error = Error;
    fn try_from(w: MatrixWire) -> Result<Self> {
        let n = w.dim * w.dim;
        if w.re.len() != n || w.im.len() != n {
            return Err(Error::InvalidState(format!(
                "expected {n} entries for dim {}, got re={} im={}",
                w.dim,
                w.re.len(),
                w.im.len()
            )));
        }
        QState::new(CMatrix::from_fn(w.dim, w.dim, |i, j| {
            Complex64::new(w.re[i * w.dim + j], w.im[i * w.dim + j])
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct VectorWire {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<DiagonalFilter> for VectorWire {
    fn from(f: DiagonalFilter) -> Self {
        Self {
            dim: f.dim(),
            re: f.coeffs.iter().map(|m| m.re).collect(),
            im: f.coeffs.iter().map(|m| m.im).collect(),
        }
    }
}

impl TryFrom<VectorWire> for DiagonalFilter {
    type Error = Error;
    fn try_from(w: VectorWire) -> Result<Self> {
        if w.re.len() != w.dim || w.im.len() != w.dim {
            return Err(Error::InvalidFilter(format!(
                "expected {} coefficients, got re={} im={}",
                w.dim,
                w.re.len(),
                w.im.len()
            )));
        }
        DiagonalFilter::new(
            w.re.iter()
                .zip(&w.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
        )
    }
}
