//! Momentum-free Adam for matrix parameters with reduced second-moment
//! estimators: the rank-1 factored estimate built from running row and
//! column sums, and the cruder row-mean / column-mean estimates.

use super::{check_finite, compute_rms_u, FactoredState, MeanState, OptimError, SlotKind, StepStats};
use crate::tensor::{self, DenseMatrix};

fn check_matrix(x: &DenseMatrix, g: &DenseMatrix) -> Result<(), OptimError> {
    if x.shape() != g.shape() {
        let kind = |m: &DenseMatrix| SlotKind::Matrix {
            rows: m.rows(),
            cols: m.cols(),
        };
        return Err(OptimError::ShapeMismatch {
            slot: "matrix".into(),
            expected: kind(x),
            got: kind(g),
        });
    }
    check_finite("matrix", g.as_slice())
}

/// Rank-1 reconstruction `V̂_ij = r_i c_j / Σ_k r_k`, scaled by `scale`.
/// A zero total yields an all-zero estimate.
pub fn reconstruct_second_moment(r: &[f64], c: &[f64], scale: f64) -> DenseMatrix {
    let total = tensor::sum(r);
    if total == 0.0 {
        return DenseMatrix::zeros(r.len(), c.len());
    }
    DenseMatrix::from_fn(r.len(), c.len(), |i, j| r[i] * c[j] / total * scale)
}

/// Squared-gradient row and column sums, in one pass.
pub(crate) fn squared_row_col_sums(g: &DenseMatrix, eps1: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; g.rows()];
    let mut cols = vec![0.0; g.cols()];
    for (i, row_sum) in rows.iter_mut().enumerate() {
        for (col_sum, &x) in cols.iter_mut().zip(g.row(i)) {
            let sq = x * x + eps1;
            *row_sum += sq;
            *col_sum += sq;
        }
    }
    (rows, cols)
}

/// Applies `x -= α g / (√v̂ + ε)` and reports diagnostics.
fn apply_scaled(
    x: &mut DenseMatrix,
    g: &DenseMatrix,
    v_hat: &DenseMatrix,
    alpha: f64,
    eps: f64,
    t: u64,
) -> StepStats {
    let xs = x.as_mut_slice();
    for ((xi, &gi), &vi) in xs.iter_mut().zip(g.as_slice()).zip(v_hat.as_slice()) {
        *xi -= alpha * gi / (vi.sqrt() + eps);
    }
    StepStats {
        t,
        alpha,
        rms_u: compute_rms_u(g.as_slice(), v_hat.as_slice()),
        rms_x: tensor::rms(xs),
        clipped: false,
    }
}

/// One step of Adam (β1 = 0) with factored second moments:
///
/// ```text
/// R_t = β2 R + (1 − β2) (G²) 1_m
/// C_t = β2 C + (1 − β2) 1_nᵀ (G²)
/// V̂   = (R_t C_t / 1_nᵀ R_t) / (1 − β2^t)
/// X  -= α G / (√V̂ + ε)
/// ```
pub fn factored_adam_step(
    state: &mut FactoredState,
    x: &mut DenseMatrix,
    g: &DenseMatrix,
    alpha: f64,
    beta2: f64,
    eps: f64,
) -> Result<StepStats, OptimError> {
    check_matrix(x, g)?;
    state.t += 1;
    let (row_sq, col_sq) = squared_row_col_sums(g, 0.0);
    tensor::ema_in_place(&mut state.r, &row_sq, beta2);
    tensor::ema_in_place(&mut state.c, &col_sq, beta2);
    let correction = 1.0 / (1.0 - beta2.powf(state.t as f64));
    let v_hat = reconstruct_second_moment(&state.r, &state.c, correction);
    Ok(apply_scaled(x, g, &v_hat, alpha, eps, state.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanVariant {
    /// One estimate per row, shared across that row's columns.
    RowMean,
    /// One estimate per column, shared down that column.
    ColMean,
}

/// One momentum-free Adam step whose second moment for entry `(i, j)` is the
/// bias-corrected running mean of `G²` over row `i` (or column `j`).
pub fn mean_estimator_step(
    variant: MeanVariant,
    state: &mut MeanState,
    x: &mut DenseMatrix,
    g: &DenseMatrix,
    alpha: f64,
    beta2: f64,
    eps: f64,
) -> Result<StepStats, OptimError> {
    check_matrix(x, g)?;
    let expected = match variant {
        MeanVariant::RowMean => g.rows(),
        MeanVariant::ColMean => g.cols(),
    };
    if state.acc.len() != expected {
        return Err(OptimError::StateMismatch {
            slot: "matrix".into(),
            kind: SlotKind::Matrix {
                rows: g.rows(),
                cols: g.cols(),
            },
        });
    }
    state.t += 1;
    let (row_sq, col_sq) = squared_row_col_sums(g, 0.0);
    let means: Vec<f64> = match variant {
        MeanVariant::RowMean => row_sq.iter().map(|s| s / g.cols() as f64).collect(),
        MeanVariant::ColMean => col_sq.iter().map(|s| s / g.rows() as f64).collect(),
    };
    tensor::ema_in_place(&mut state.acc, &means, beta2);
    let correction = 1.0 - beta2.powf(state.t as f64);
    let acc = &state.acc;
    let v_hat = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| match variant {
        MeanVariant::RowMean => acc[i] / correction,
        MeanVariant::ColMean => acc[j] / correction,
    });
    Ok(apply_scaled(x, g, &v_hat, alpha, eps, state.t))
}
