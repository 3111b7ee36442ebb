//! Synthetic objectives with analytic gradients, used as testbeds for the
//! optimizers, plus gradient streams that ignore the parameters entirely.
//!
//! Every problem is deterministic given its seed: evaluating at the same
//! `(parameters, batch)` always yields bit-identical loss and gradients.

mod embed;
mod logreg;
mod mlp;
mod quad;
mod stream;

pub use embed::{EmbeddingScaleProblem, EmbeddingVariant};
pub use logreg::LogisticRegression;
pub use mlp::TwoLayerNet;
pub use quad::QuadraticBowl;
pub use stream::{GradientStream, ScaleJumpStream, StreamProblem};

use crate::optim::{ParamSlot, ParamValue};

/// Which data an evaluation sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    /// Noiseless, full-data objective.
    Full,
    /// The stochastic realization drawn for training step `t`.
    Step(u64),
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter slots at their seeded initial values.
    fn initial_slots(&self) -> Vec<ParamSlot>;

    /// Loss and per-slot gradients, in slot order.
    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>);

    fn loss(&self, slots: &[ParamSlot], batch: Batch) -> f64 {
        self.loss_and_grad(slots, batch).0
    }

    /// Known minimal value of the full objective, if any.
    fn optimum(&self) -> Option<f64> {
        None
    }
}

/// Names accepted on the command line.
pub const PROBLEM_NAMES: [&str; 5] = ["quad", "logreg", "mlp", "embed-scale", "stream-jump"];

pub(crate) fn slot_value<'a>(slots: &'a [ParamSlot], index: usize, name: &str) -> &'a ParamValue {
    let slot = &slots[index];
    debug_assert_eq!(slot.name, name);
    &slot.value
}

/// Numerically stable `log(1 + e^z)`.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of `logits` against `label`; overwrites `logits` with
/// `softmax(logits) − onehot(label)`.
pub(crate) fn softmax_cross_entropy(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        total += *z;
    }
    let loss = total.ln() - (logits[label].ln());
    for z in logits.iter_mut() {
        *z /= total;
    }
    logits[label] -= 1.0;
    loss
}

/// Deterministic minibatch indices for `(seed, step)`, drawn with
/// replacement. `Batch::Full` yields `0..n`.
pub(crate) fn batch_indices(seed: u64, batch: Batch, n: usize, size: usize) -> Vec<usize> {
    match batch {
        Batch::Step(t) if size < n => {
            let mut rng = crate::rng::SplitMix64::for_step(seed, t);
            (0..size).map(|_| rng.below(n)).collect()
        }
        _ => (0..n).collect(),
    }
}

/// Seeded standard-normal data rescaled to exactly the requested RMS.
pub(crate) fn normal_with_rms(rng: &mut crate::rng::SplitMix64, n: usize, rms: f64) -> Vec<f64> {
    let mut z = rng.normals(n);
    let current = crate::tensor::rms(&z);
    z.iter_mut().for_each(|x| *x *= rms / current);
    z
}
