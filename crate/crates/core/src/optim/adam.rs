//! Adam, in the usual bias-corrected form and in the equivalent form where
//! the bias corrections are folded into per-step decay rates
//! `β̂_t = β (1 − β^{t−1}) / (1 − β^t)`.

use super::{check_gradient, compute_rms_u, AdamState, OptimError, StepStats};
use crate::schedule::corrected_decay;
use crate::tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

fn ensure_momentum(state: &mut AdamState, len: usize, beta1: f64) {
    if beta1 > 0.0 && state.m.is_none() {
        state.m = Some(vec![0.0; len]);
    }
}

/// One bias-corrected Adam step:
///
/// ```text
/// m_t = β1 m + (1 − β1) g        m̂ = m_t / (1 − β1^t)
/// v_t = β2 v + (1 − β2) g²       v̂ = v_t / (1 − β2^t)
/// x  -= α m̂ / (√v̂ + ε)
/// ```
pub fn adam_step(
    state: &mut AdamState,
    x: &mut [f64],
    g: &[f64],
    hp: &AdamHyper,
) -> Result<StepStats, OptimError> {
    check_gradient("adam", x, g)?;
    ensure_momentum(state, x.len(), hp.beta1);
    state.t += 1;
    let t = state.t as f64;
    let m_correction = 1.0 - hp.beta1.powf(t);
    let v_correction = 1.0 - hp.beta2.powf(t);

    let mut v_hat = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let gi = g[i];
        state.v[i] = tensor::ema(state.v[i], gi * gi, hp.beta2);
        let vh = state.v[i] / v_correction;
        let mh = match state.m.as_mut() {
            Some(m) => {
                m[i] = tensor::ema(m[i], gi, hp.beta1);
                m[i] / m_correction
            }
            None => gi,
        };
        x[i] -= hp.alpha * mh / (vh.sqrt() + hp.eps);
        v_hat.push(vh);
    }

    Ok(StepStats {
        t: state.t,
        alpha: hp.alpha,
        rms_u: compute_rms_u(g, &v_hat),
        rms_x: tensor::rms(x),
        clipped: false,
    })
}

/// One step of the decay-corrected formulation; `state.m` and `state.v`
/// hold `m̂` and `v̂` directly.
///
/// ```text
/// m̂ = β̂1_t m̂ + (1 − β̂1_t) g
/// v̂ = β̂2_t v̂ + (1 − β̂2_t) g²
/// x -= α m̂ / (√v̂ + ε)
/// ```
pub fn adam_equivalent_step(
    state: &mut AdamState,
    x: &mut [f64],
    g: &[f64],
    hp: &AdamHyper,
) -> Result<StepStats, OptimError> {
    check_gradient("adam", x, g)?;
    ensure_momentum(state, x.len(), hp.beta1);
    state.t += 1;
    let beta1_t = corrected_decay(hp.beta1, state.t);
    let beta2_t = corrected_decay(hp.beta2, state.t);

    for i in 0..x.len() {
        let gi = g[i];
        state.v[i] = tensor::ema(state.v[i], gi * gi, beta2_t);
        let mh = match state.m.as_mut() {
            Some(m) => {
                m[i] = tensor::ema(m[i], gi, beta1_t);
                m[i]
            }
            None => gi,
        };
        x[i] -= hp.alpha * mh / (state.v[i].sqrt() + hp.eps);
    }

    Ok(StepStats {
        t: state.t,
        alpha: hp.alpha,
        rms_u: compute_rms_u(g, &state.v),
        rms_x: tensor::rms(x),
        clipped: false,
    })
}
