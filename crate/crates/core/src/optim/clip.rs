use crate::tensor;

/// `sqrt(mean(g² / v̂))`, the RMS of the unscaled update `g / √v̂`.
///
/// Entries with `v̂ = 0` and `g = 0` contribute zero.
///
/// # Panics
/// On length mismatch.
pub fn compute_rms_u(g: &[f64], v_hat: &[f64]) -> f64 {
    assert_eq!(g.len(), v_hat.len(), "shape mismatch: {} vs {}", g.len(), v_hat.len());
    let total = g.iter().zip(v_hat).fold(0.0, |acc, (&gi, &vi)| {
        let ratio = if gi == 0.0 { 0.0 } else { gi * gi / vi };
        acc + ratio
    });
    (total / g.len() as f64).sqrt()
}

/// Scales `u` down so that `RMS(u) ≤ threshold`, i.e. divides by
/// `max(1, RMS(u) / threshold)`. Returns whether the clip engaged; when it
/// does not, `u` is left bit-identical.
pub fn clip_update(u: &mut [f64], threshold: f64) -> bool {
    debug_assert!(threshold > 0.0);
    let r = tensor::rms(u);
    if r <= threshold {
        return false;
    }
    let denom = r / threshold;
    u.iter_mut().for_each(|x| *x /= denom);
    true
}
