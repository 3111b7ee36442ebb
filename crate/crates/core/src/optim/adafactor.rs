//! Adafactor: factored second moments for matrices, a decay schedule with
//! `β̂2_1 = 0` in place of bias correction, update clipping, and step sizes
//! relative to the parameter scale.
//!
//! Matrix step (vector step is identical with a full accumulator):
//!
//! ```text
//! α_t = max(ε2, RMS(X_{t−1})) ρ_t
//! R_t = β̂2_t R + (1 − β̂2_t) (G² + ε1) 1_m
//! C_t = β̂2_t C + (1 − β̂2_t) 1_nᵀ (G² + ε1)
//! V̂   = R_t C_t / 1_nᵀ R_t
//! U   = G / √V̂
//! Û   = U / max(1, RMS(U) / d)
//! X  -= α_t Û
//! ```
//!
//! With `beta1 > 0`, a first moment with decay `β1 (1 − β1^{t−1}) / (1 − β1^t)`
//! smooths `Û` after clipping, and `X -= α_t m̂` instead.

use super::factored::{reconstruct_second_moment, squared_row_col_sums};
use super::{check_finite, check_gradient, check_hyper, clip_update, FactoredState, OptimError, SlotKind, StepStats, VectorState};
use crate::schedule::{corrected_decay, relative_step_size, DecaySchedule, StepSizeSchedule};
use crate::tensor::{self, DenseMatrix};

pub const DEFAULT_EPS1: f64 = 1e-30;
pub const DEFAULT_EPS2: f64 = 1e-3;
pub const DEFAULT_CLIP_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClipConfig {
    Disabled,
    Threshold(f64),
}

impl ClipConfig {
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Self::Disabled => None,
            Self::Threshold(d) => Some(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdafactorConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub clip: ClipConfig,
    /// Relative kinds scale by `max(ε2, RMS(X))`; absolute kinds are used as is.
    pub step: StepSizeSchedule,
    pub decay: DecaySchedule,
    pub beta1: f64,
    /// Keep only row/column sums for matrix slots. When false, matrices get a
    /// full accumulator like vectors.
    pub factored: bool,
}

impl Default for AdafactorConfig {
    fn default() -> Self {
        Self {
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
            clip: ClipConfig::Threshold(DEFAULT_CLIP_THRESHOLD),
            step: StepSizeSchedule::relative_flat(),
            decay: DecaySchedule::default(),
            beta1: 0.0,
            factored: true,
        }
    }
}

impl AdafactorConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        self.step.validate()?;
        self.decay.validate()?;
        check_hyper("eps1", self.eps1, self.eps1 >= 0.0 && self.eps1.is_finite(), "must be nonnegative")?;
        check_hyper("eps2", self.eps2, self.eps2 > 0.0 && self.eps2.is_finite(), "must be positive")?;
        check_hyper("beta1", self.beta1, (0.0..1.0).contains(&self.beta1), "must lie in [0, 1)")?;
        if let ClipConfig::Threshold(d) = self.clip {
            check_hyper("clip.d", d, d > 0.0 && d.is_finite(), "must be positive")?;
        }
        Ok(())
    }

    fn step_size(&self, t: u64, x: &[f64]) -> f64 {
        let rho = self.step.value(t);
        if self.step.is_relative() {
            relative_step_size(rho, tensor::rms(x), self.eps2)
        } else {
            rho
        }
    }
}

/// Clips `u`, applies optional momentum, and moves `x`.
fn finish_step(
    cfg: &AdafactorConfig,
    t: u64,
    alpha: f64,
    x: &mut [f64],
    mut u: Vec<f64>,
    momentum: Option<&mut Vec<f64>>,
) -> StepStats {
    let rms_u = tensor::rms(&u);
    let clipped = match cfg.clip.threshold() {
        Some(d) => clip_update(&mut u, d),
        None => false,
    };
    let direction = match momentum {
        Some(m) => {
            let beta1_t = corrected_decay(cfg.beta1, t);
            tensor::ema_in_place(m, &u, beta1_t);
            m.as_slice()
        }
        None => u.as_slice(),
    };
    tensor::axpy(x, -alpha, direction);
    StepStats {
        t,
        alpha,
        rms_u,
        rms_x: tensor::rms(x),
        clipped,
    }
}

fn ensure_momentum(m: &mut Option<Vec<f64>>, len: usize, beta1: f64) {
    if beta1 > 0.0 && m.is_none() {
        *m = Some(vec![0.0; len]);
    }
}

/// `g / √v̂`, with `0 / 0 = 0` when both vanish (only possible with ε1 = 0).
fn unscaled_update(g: &[f64], v_hat: &[f64]) -> Vec<f64> {
    g.iter()
        .zip(v_hat)
        .map(|(&gi, &vi)| if gi == 0.0 { 0.0 } else { gi / vi.sqrt() })
        .collect()
}

/// One Adafactor step for a matrix slot with factored second moments.
pub fn adafactor_matrix_step(
    state: &mut FactoredState,
    x: &mut DenseMatrix,
    g: &DenseMatrix,
    cfg: &AdafactorConfig,
) -> Result<StepStats, OptimError> {
    if x.shape() != g.shape() || state.r.len() != x.rows() || state.c.len() != x.cols() {
        return Err(OptimError::ShapeMismatch {
            slot: "matrix".into(),
            expected: SlotKind::Matrix {
                rows: state.r.len(),
                cols: state.c.len(),
            },
            got: SlotKind::Matrix {
                rows: g.rows(),
                cols: g.cols(),
            },
        });
    }
    check_finite("matrix", g.as_slice())?;
    ensure_momentum(&mut state.m, x.len(), cfg.beta1);

    state.t += 1;
    let t = state.t;
    let alpha = cfg.step_size(t, x.as_slice());
    let beta2_t = cfg.decay.rate(t);
    let (row_sq, col_sq) = squared_row_col_sums(g, cfg.eps1);
    tensor::ema_in_place(&mut state.r, &row_sq, beta2_t);
    tensor::ema_in_place(&mut state.c, &col_sq, beta2_t);
    let v_hat = reconstruct_second_moment(&state.r, &state.c, 1.0);
    let u = unscaled_update(g.as_slice(), v_hat.as_slice());
    Ok(finish_step(cfg, t, alpha, x.as_mut_slice(), u, state.m.as_mut()))
}

/// One Adafactor step for a vector (or scalar, or unfactored matrix) slot.
pub fn adafactor_vector_step(
    state: &mut VectorState,
    x: &mut [f64],
    g: &[f64],
    cfg: &AdafactorConfig,
) -> Result<StepStats, OptimError> {
    check_gradient("vector", x, g)?;
    if state.v_hat.len() != x.len() {
        return Err(OptimError::StateMismatch {
            slot: "vector".into(),
            kind: SlotKind::Vector(x.len()),
        });
    }
    ensure_momentum(&mut state.m, x.len(), cfg.beta1);

    state.t += 1;
    let t = state.t;
    let alpha = cfg.step_size(t, x);
    let beta2_t = cfg.decay.rate(t);
    for (v, &gi) in state.v_hat.iter_mut().zip(g) {
        *v = tensor::ema(*v, gi * gi + cfg.eps1, beta2_t);
    }
    let u = unscaled_update(g, &state.v_hat);
    Ok(finish_step(cfg, t, alpha, x, u, state.m.as_mut()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn defaults_match_recommended_hyperparameters() {
        let c = AdafactorConfig::default();
        assert_eq!(c.eps1, 1e-30);
        assert_eq!(c.eps2, 1e-3);
        assert_eq!(c.clip, ClipConfig::Threshold(1.0));
        assert_eq!(c.step, StepSizeSchedule::relative_flat());
        assert_eq!(c.decay, DecaySchedule::Increasing(0.8));
        assert_eq!(c.beta1, 0.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn zero_initialized_slot_uses_eps2_floor() {
        let cfg = AdafactorConfig::default();
        let mut s = FactoredState::new(3, 2, false);
        let mut x = DenseMatrix::zeros(3, 2);
        let g = DenseMatrix::from_fn(3, 2, |i, j| (i as f64 - j as f64) + 0.5);
        let stats = adafactor_matrix_step(&mut s, &mut x, &g, &cfg).unwrap();
        assert!((stats.alpha - 1e-5).abs() < 1e-20);
    }

    #[test]
    fn first_step_has_unit_rms_u_for_rank_one_squares() {
        let cfg = AdafactorConfig::default();
        let mut rng = SplitMix64::new(12);
        let a: Vec<f64> = (0..4).map(|_| rng.uniform(0.5, 2.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.uniform(0.5, 2.0)).collect();
        let g = DenseMatrix::from_fn(4, 3, |i, j| {
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            sign * a[i] * b[j]
        });
        let mut s = FactoredState::new(4, 3, false);
        let mut x = DenseMatrix::filled(4, 3, 1.0);
        let stats = adafactor_matrix_step(&mut s, &mut x, &g, &cfg).unwrap();
        assert!((stats.rms_u - 1.0).abs() < 1e-6);
        assert!(!stats.clipped);
    }

    #[test]
    fn zero_gradient_at_first_step_is_a_zero_update() {
        let cfg = AdafactorConfig::default();
        let mut s = FactoredState::new(2, 2, false);
        let mut x = DenseMatrix::filled(2, 2, 0.3);
        let stats = adafactor_matrix_step(&mut s, &mut x, &DenseMatrix::zeros(2, 2), &cfg).unwrap();
        assert_eq!(x, DenseMatrix::filled(2, 2, 0.3));
        assert_eq!(stats.rms_u, 0.0);

        let mut vs = VectorState::new(3, false);
        let mut xv = vec![1.0, 2.0, 3.0];
        adafactor_vector_step(&mut vs, &mut xv, &[0.0; 3], &cfg).unwrap();
        assert_eq!(xv, vec![1.0, 2.0, 3.0]);
        assert!(vs.v_hat.iter().all(|&v| v == 1e-30));
    }

    #[test]
    fn constant_gradient_stream_moves_against_sign() {
        let cfg = AdafactorConfig::default();
        let mut s = VectorState::new(2, false);
        let mut x = vec![1.0, -1.0];
        let g = [0.3, -2.0];
        for _ in 0..200 {
            let before = x.clone();
            let stats = adafactor_vector_step(&mut s, &mut x, &g, &cfg).unwrap();
            assert!((stats.rms_u - 1.0).abs() < 1e-9);
            for k in 0..2 {
                let step = x[k] - before[k];
                assert!((step + stats.alpha * g[k].signum()).abs() < 1e-9 * stats.alpha.max(1e-300));
            }
        }
    }

    #[test]
    fn accumulator_totals_agree_each_step() {
        let cfg = AdafactorConfig::default();
        let mut rng = SplitMix64::new(77);
        let mut s = FactoredState::new(5, 7, false);
        let mut x = DenseMatrix::from_fn(5, 7, |_, _| rng.normal());
        for _ in 0..300 {
            let scale = rng.uniform(0.01, 10.0);
            let g = DenseMatrix::from_fn(5, 7, |_, _| scale * rng.normal());
            adafactor_matrix_step(&mut s, &mut x, &g, &cfg).unwrap();
            let (sr, sc) = (tensor::sum(&s.r), tensor::sum(&s.c));
            assert!((sr - sc).abs() <= 1e-12 * sr);
            assert!(s.r.iter().chain(&s.c).all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn momentum_smooths_the_clipped_update() {
        let cfg = AdafactorConfig {
            beta1: 0.9,
            ..AdafactorConfig::default()
        };
        let mut s = VectorState::new(1, true);
        let mut x = vec![1.0];
        // First step: corrected β1 is 0, so m = Û = sign(g).
        adafactor_vector_step(&mut s, &mut x, &[2.0], &cfg).unwrap();
        assert!((s.m.as_ref().unwrap()[0] - 1.0).abs() < 1e-12);
        // Opposite gradient: m̂ = β̂1_2·1 + (1 − β̂1_2)(−1) with β̂1_2 = 0.9·0.1/0.19.
        adafactor_vector_step(&mut s, &mut x, &[-2.0], &cfg).unwrap();
        let b = 0.9 * 0.1 / (1.0 - 0.81);
        assert!((s.m.as_ref().unwrap()[0] - (2.0 * b - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn absolute_schedule_ignores_parameter_scale() {
        let cfg = AdafactorConfig {
            step: StepSizeSchedule::absolute_flat(0.1),
            ..AdafactorConfig::default()
        };
        let mut s = VectorState::new(2, false);
        let mut x = vec![100.0, 100.0];
        let stats = adafactor_vector_step(&mut s, &mut x, &[1.0, 1.0], &cfg).unwrap();
        assert!((stats.alpha - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn clipping_engages_after_scale_jump() {
        let cfg = AdafactorConfig {
            decay: DecaySchedule::ConstantBiasCorrected(0.999),
            ..AdafactorConfig::default()
        };
        let mut s = VectorState::new(4, false);
        let mut x = vec![1.0; 4];
        for _ in 0..100 {
            adafactor_vector_step(&mut s, &mut x, &[1.0; 4], &cfg).unwrap();
        }
        let stats = adafactor_vector_step(&mut s, &mut x, &[10.0; 4], &cfg).unwrap();
        assert!(stats.rms_u > 1.0);
        assert!(stats.clipped);
    }
}
