//! Rank-1 nonnegative factorization under the generalized KL divergence.
//!
//! For a nonnegative `n×m` matrix `V`, the rank-1 pair minimizing
//! `Σ_ij d(V_ij, r_i s_j)` with `d(p, q) = p log(p/q) − p + q` is available in
//! closed form from the row and column sums alone:
//!
//! ```text
//! r = V 1_m,    s = 1_nᵀ V / (1_nᵀ V 1_m)
//! ```
//!
//! Any `(α r, s / α)` with `α > 0` is equally optimal; the canonical choice
//! fixes `Σ r_i` to the total mass of `V`. Because the projection only needs
//! row and column sums, which are linear in `V`, it commutes with exponential
//! smoothing. That is what lets the factored optimizers keep `n + m` numbers
//! instead of `n m`.

use crate::tensor::{DenseMatrix, DenseVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("I-divergence is only defined for nonnegative inputs, got d({p}, {q})")]
    NegativeInput { p: f64, q: f64 },
    #[error("matrix entry ({row}, {col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("factor shapes {r}x{s} do not match matrix {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        r: usize,
        s: usize,
    },
}

/// Rank-1 factors `r sᵀ`, both nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFactors {
    pub r: DenseVector,
    pub s: DenseVector,
}

impl RankOneFactors {
    pub fn product(&self) -> DenseMatrix {
        DenseMatrix::outer(&self.r, &self.s)
    }

    /// The equivalent pair `(α r, s / α)`.
    pub fn rescaled(&self, alpha: f64) -> Self {
        let mut r = self.r.clone();
        let mut s = self.s.clone();
        r.as_mut_slice().iter_mut().for_each(|x| *x *= alpha);
        s.as_mut_slice().iter_mut().for_each(|x| *x /= alpha);
        Self { r, s }
    }
}

/// Generalized KL divergence of two nonnegative scalars.
///
/// Uses `0 log 0 = 0` and `p/0 = ∞` for `p > 0`, so `d(0, q) = q` and
/// `d(p, 0) = +∞` whenever `p > 0`.
pub fn i_divergence(p: f64, q: f64) -> Result<f64, FactorError> {
    if p < 0.0 || q < 0.0 || p.is_nan() || q.is_nan() {
        return Err(FactorError::NegativeInput { p, q });
    }
    Ok(i_divergence_unchecked(p, q))
}

fn i_divergence_unchecked(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        q
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        // Rounding can push the exact-zero case slightly negative.
        (p * (p / q).ln() - p + q).max(0.0)
    }
}

fn check_nonnegative(v: &DenseMatrix) -> Result<(), FactorError> {
    for i in 0..v.rows() {
        for (j, &value) in v.row(i).iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(FactorError::NegativeEntry { row: i, col: j, value });
            }
        }
    }
    Ok(())
}

/// `Σ_ij d(V_ij, r_i s_j)`. Positive mass facing a zero prediction yields
/// `+∞`.
pub fn total_divergence(v: &DenseMatrix, f: &RankOneFactors) -> Result<f64, FactorError> {
    if f.r.len() != v.rows() || f.s.len() != v.cols() {
        return Err(FactorError::ShapeMismatch {
            rows: v.rows(),
            cols: v.cols(),
            r: f.r.len(),
            s: f.s.len(),
        });
    }
    check_nonnegative(v)?;
    let mut total = 0.0;
    for i in 0..v.rows() {
        for (j, &p) in v.row(i).iter().enumerate() {
            let q = f.r[i] * f.s[j];
            if q < 0.0 {
                return Err(FactorError::NegativeInput { p, q });
            }
            total += i_divergence_unchecked(p, q);
        }
    }
    Ok(total)
}

/// Closed-form rank-1 I-divergence projection.
///
/// An all-zero matrix maps to zero factors. A zero row (or column) gets a
/// zero factor entry, so it contributes nothing to the divergence.
pub fn project_rank_one(v: &DenseMatrix) -> Result<RankOneFactors, FactorError> {
    check_nonnegative(v)?;
    let r = v.row_sums();
    let mut s = v.col_sums();
    let total = r.sum();
    if total > 0.0 {
        s.as_mut_slice().iter_mut().for_each(|x| *x /= total);
    } else {
        s = DenseVector::zeros(v.cols());
    }
    Ok(RankOneFactors { r, s })
}
