//! Small dense complex helpers shared by the modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this are treated as exactly zero in entropies.
pub const ENTROPY_FLOOR: f64 = 1e-14;

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p >= ENTROPY_FLOOR)
        .map(|&p| -p * p.ln())
        .sum()
}

pub fn von_neumann_entropy(m: &CMatrix) -> f64 {
    shannon_entropy(&hermitian_eigenvalues(m))
}

pub fn real_diagonal(m: &CMatrix) -> Vec<f64> {
    m.diagonal().iter().map(|z| z.re).collect()
}

/// `D ρ D†` for a diagonal `D` given by its entries.
pub fn sandwich_diagonal(diag: &[Complex64], m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    CMatrix::from_fn(n, n, |i, j| diag[i] * m[(i, j)] * diag[j].conj())
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Average `m` with its adjoint so rounding never breaks Hermiticity.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_complex_hermitian() {
        // [[1, -i], [i, 1]] has eigenvalues 0 and 2.
        let i = Complex64::i();
        let m = CMatrix::from_row_slice(2, 2, &[1.0.into(), -i, i, 1.0.into()]);
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 0.0).abs() < 1e-14);
        assert!((ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_ignores_zero_mass() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 1e-16]), 0.0);
        assert!((shannon_entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
    }
}
