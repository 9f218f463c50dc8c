//! Iterated pairwise filtering and its sequential-measurement form.
//!
//! Filtering a pair `ρ ⊗ σ` with a diagonal two-system filter and discarding
//! the partner leaves a mixture of single-system filters,
//! `Σ_j σ_jj K_j ρ K_j†` with `K_j = Σ_k m_kj |k⟩⟨k|` (filter index
//! `k·d + j`, partner last). Two such outputs filtered again give a
//! multi-Kraus diagonal map `Σ_l W_l (ρ⊗ρ) W_l†`, which a chain of two-outcome
//! measurements realizes by stopping at the first plus outcome.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::{DiagonalFilter, QState};
use crate::Complex64;

/// Slack on `Σ W_l†W_l ≤ I` and on POVM completeness.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Diagonal entries below this magnitude pseudo-invert to zero.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Diagonal Kraus operators, stored by their diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<Vec<Complex64>>,
}

impl KrausSet {
    pub fn new(dim: usize, operators: Vec<Vec<Complex64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("Kraus set of dimension 0".into()));
        }
        if let Some(bad) = operators.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if operators
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite Kraus entry".into()));
        }
        let set = Self { dim, operators };
        let excess = set.completeness_excess();
        if excess > COMPLETENESS_TOL {
            return Err(Error::NotTraceDecreasing(1.0 + excess));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[Vec<Complex64>] {
        &self.operators
    }

    pub fn matrix(&self, l: usize) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.operators[l].clone()))
    }

    /// Diagonal of `Σ_l W_l†W_l`.
    pub fn effect(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        for w in &self.operators {
            for (t, z) in total.iter_mut().zip(w) {
                *t += z.norm_sqr();
            }
        }
        total
    }

    /// How far `Σ_l W_l†W_l` exceeds the identity (≤ 0 when trace decreasing).
    pub fn completeness_excess(&self) -> f64 {
        self.effect()
            .into_iter()
            .map(|e| e - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_l W_l ρ W_l†` (not normalized).
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for w in &self.operators {
            out += linalg::sandwich_diagonal(w, rho);
        }
        Ok(out)
    }

    /// The single filter `√(Σ W_l†W_l)` with the same output populations.
    pub fn equivalent_filter(&self) -> Result<DiagonalFilter> {
        let weights: Vec<f64> = self.effect().into_iter().map(|e| e.min(1.0)).collect();
        DiagonalFilter::from_weights(&weights)
    }
}

/// Ordered plus/minus measurement pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialPovm {
    dim: usize,
    plus: Vec<Vec<Complex64>>,
    minus: Vec<Vec<f64>>,
}

impl SequentialPovm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stages(&self) -> usize {
        self.plus.len()
    }

    pub fn plus(&self, l: usize) -> &[Complex64] {
        &self.plus[l]
    }

    pub fn minus(&self, l: usize) -> &[f64] {
        &self.minus[l]
    }

    /// Largest deviation of `M₊†M₊ + M₋†M₋` from the identity over all stages.
    pub fn completeness_residual(&self) -> f64 {
        self.plus
            .iter()
            .zip(&self.minus)
            .flat_map(|(p, m)| {
                p.iter()
                    .zip(m)
                    .map(|(p, m)| (p.norm_sqr() + m * m - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

fn check_dims(filter: &DiagonalFilter, d: usize) -> Result<()> {
    if filter.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: filter.dim(),
        });
    }
    Ok(())
}

/// Column operators `K_j` of a two-system filter (partner index `j`).
pub fn column_operators(filter2q: &DiagonalFilter, d: usize) -> Result<Vec<Vec<Complex64>>> {
    check_dims(filter2q, d)?;
    let m = filter2q.coeffs();
    Ok((0..d)
        .map(|j| (0..d).map(|k| m[k * d + j]).collect())
        .collect())
}

/// Kraus operators `√(σ_jj) K_j` of pairwise filtering followed by discarding
/// the partner `σ`.
pub fn reduced_kraus(filter2q: &DiagonalFilter, partner: &QState) -> Result<KrausSet> {
    let d = partner.dim();
    let columns = column_operators(filter2q, d)?;
    let pops = partner.populations();
    let operators = columns
        .into_iter()
        .zip(pops)
        .map(|(k, p)| {
            let s = p.max(0.0).sqrt();
            k.into_iter().map(|z| z * s).collect()
        })
        .collect();
    KrausSet::new(d, operators)
}

/// Two-stage protocol on four copies of `input`: each pair is filtered with
/// `stage1` and loses its partner, then the survivors are paired and
/// filtered with `stage2`.
///
/// Returns the Kraus set `W_jk = √(ρ_jj ρ_kk)·M′(K_j ⊗ K_k)` (index
/// `j·d + k`) and the unnormalized output `σ = Σ W_jk (ρ⊗ρ) W_jk†`, whose
/// trace is the overall success probability.
pub fn compose_iteration(
    stage1: &DiagonalFilter,
    stage2: &DiagonalFilter,
    input: &QState,
) -> Result<(KrausSet, CMatrix)> {
    let d = input.dim();
    check_dims(stage2, d)?;
    let columns = column_operators(stage1, d)?;
    let pops = input.populations();
    let outer = stage2.coeffs();
    let mut operators = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let scale = (pops[j] * pops[k]).max(0.0).sqrt();
            let w = (0..d * d)
                .map(|idx| outer[idx] * columns[j][idx / d] * columns[k][idx % d] * scale)
                .collect();
            operators.push(w);
        }
    }
    let kraus = KrausSet::new(d * d, operators)?;
    let pair = linalg::kron(input.matrix(), input.matrix());
    let sigma = kraus.apply(&pair)?;
    Ok((kraus, sigma))
}

/// Direct simulation of the two-stage protocol on `input^{⊗4}`.
///
/// Systems are ordered (1, 2, 3, 4); `stage1` acts on (1, 2) and on (3, 4),
/// systems 2 and 4 are traced out and `stage2` acts on (1, 3). Returns the
/// unnormalized state of (1, 3).
pub fn simulate_two_stage_direct(
    stage1: &DiagonalFilter,
    stage2: &DiagonalFilter,
    input: &QState,
) -> Result<CMatrix> {
    let d = input.dim();
    check_dims(stage1, d)?;
    check_dims(stage2, d)?;
    let rho = input.matrix();
    let pair = linalg::kron(rho, rho);
    let four = linalg::kron(&pair, &pair);
    let first = crate::state::tensor_filter(stage1, stage1);
    let filtered = linalg::sandwich_diagonal(first.coeffs(), &four);

    let index = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
    let mut reduced = CMatrix::zeros(d * d, d * d);
    for i1 in 0..d {
        for i3 in 0..d {
            for j1 in 0..d {
                for j3 in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..d {
                        for b in 0..d {
                            acc += filtered[(index(i1, a, i3, b), index(j1, a, j3, b))];
                        }
                    }
                    reduced[(i1 * d + i3, j1 * d + j3)] = acc;
                }
            }
        }
    }
    Ok(linalg::sandwich_diagonal(stage2.coeffs(), &reduced))
}

fn clamp_sqrt(x: f64) -> f64 {
    if (-PINV_THRESHOLD..0.0).contains(&x) {
        0.0
    } else {
        x.max(0.0).sqrt()
    }
}

/// Builds `M₊,l = W_l (I − Σ_{m<l} W_m†W_m)^{−1/2}` and
/// `M₋,l = (I − M₊,l†M₊,l)^{1/2}`.
pub fn sequential_povm(kraus: &KrausSet) -> Result<SequentialPovm> {
    let d = kraus.dim();
    let excess = kraus.completeness_excess();
    if excess > COMPLETENESS_TOL {
        return Err(Error::NotTraceDecreasing(1.0 + excess));
    }
    let mut used = vec![0.0; d];
    let mut plus = Vec::with_capacity(kraus.len());
    let mut minus = Vec::with_capacity(kraus.len());
    for w in kraus.operators() {
        let mut p = Vec::with_capacity(d);
        let mut m = Vec::with_capacity(d);
        for i in 0..d {
            let remaining = clamp_sqrt(1.0 - used[i]);
            let inv = if remaining < PINV_THRESHOLD {
                0.0
            } else {
                1.0 / remaining
            };
            let mut z = w[i] * inv;
            let norm = z.norm();
            if norm > 1.0 {
                if norm > 1.0 + COMPLETENESS_TOL {
                    return Err(Error::NotTraceDecreasing(norm * norm));
                }
                z /= norm;
            }
            m.push(clamp_sqrt(1.0 - z.norm_sqr()));
            p.push(z);
            used[i] += w[i].norm_sqr();
        }
        plus.push(p);
        minus.push(m);
    }
    Ok(SequentialPovm {
        dim: d,
        plus,
        minus,
    })
}

/// Result of running a sequential POVM until the first plus outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SequentialOutcome {
    /// `Σ_l` of the plus-branch states, not normalized.
    pub unnormalized: CMatrix,
    /// Success-conditioned state; `None` if no branch can succeed.
    pub mixture: Option<QState>,
    pub p_total: f64,
    pub branch_probs: Vec<f64>,
    /// Probability that every stage answers minus.
    pub p_all_minus: f64,
}

/// Walks the decision tree of `povm` on `input`.
pub fn simulate_sequential(povm: &SequentialPovm, input: &QState) -> Result<SequentialOutcome> {
    let d = povm.dim();
    if input.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: input.dim(),
        });
    }
    let rho = input.matrix();
    let mut history = vec![Complex64::new(1.0, 0.0); d];
    let mut unnormalized = CMatrix::zeros(d, d);
    let mut branch_probs = Vec::with_capacity(povm.stages());
    for l in 0..povm.stages() {
        let effective: Vec<Complex64> = povm.plus[l]
            .iter()
            .zip(&history)
            .map(|(p, h)| p * h)
            .collect();
        let branch = linalg::sandwich_diagonal(&effective, rho);
        branch_probs.push(branch.trace().re);
        unnormalized += branch;
        for (h, m) in history.iter_mut().zip(&povm.minus[l]) {
            *h *= *m;
        }
    }
    let p_all_minus = linalg::sandwich_diagonal(&history, rho).trace().re;
    let p_total: f64 = branch_probs.iter().sum();
    let mixture = if p_total > crate::state::ZERO_POPULATION {
        Some(QState::new(linalg::hermitize(
            &(&unnormalized / Complex64::from(p_total)),
        ))?)
    } else {
        None
    };
    Ok(SequentialOutcome {
        unnormalized,
        mixture,
        p_total,
        branch_probs,
        p_all_minus,
    })
}
