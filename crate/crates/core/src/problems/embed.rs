use super::{normal_with_rms, slot_value, softmax_cross_entropy, Batch, Problem};
use crate::optim::{ParamSlot, ParamValue, SlotKind};
use crate::rng::SplitMix64;
use crate::tensor::DenseMatrix;

pub const DEFAULT_VOCAB: usize = 32;
pub const DEFAULT_CLASSES: usize = 8;
/// Logit scale of the seeded per-token class distributions.
const TARGET_SHARPNESS: f64 = 2.0;

/// Initialization and forward-multiplier scheme for the embedding slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingVariant {
    /// Std `1/√d`, multiplied by `√d` in the forward pass.
    Scaled,
    /// Std 1, no multiplier.
    UnitInit,
    /// Std `1/√d`, no multiplier.
    SmallInit,
}

impl EmbeddingVariant {
    pub const ALL: [EmbeddingVariant; 3] = [Self::Scaled, Self::UnitInit, Self::SmallInit];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scaled => "scaled",
            Self::UnitInit => "unit-init",
            Self::SmallInit => "small-init",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// `(init std, forward multiplier)` for width `d_model`.
    pub fn init_and_multiplier(self, d_model: usize) -> (f64, f64) {
        let root = (d_model as f64).sqrt();
        match self {
            Self::Scaled => (1.0 / root, root),
            Self::UnitInit => (1.0, 1.0),
            Self::SmallInit => (1.0 / root, 1.0),
        }
    }
}

/// Linear-softmax classifier over token embeddings with
/// `logits = W_out · (multiplier · E[token])`.
///
/// Each token has a seeded class distribution. `Batch::Step(t)` draws one
/// label per token from it; `Batch::Full` scores against the distributions
/// themselves, so its minimum is their mean entropy.
///
/// Slots, in order: `embedding` (vocab × d), `output` (classes × d).
#[derive(Debug, Clone)]
pub struct EmbeddingScaleProblem {
    pub d_model: usize,
    pub variant: EmbeddingVariant,
    pub vocab: usize,
    pub classes: usize,
    pub seed: u64,
    targets: Vec<Vec<f64>>,
}

impl EmbeddingScaleProblem {
    pub fn new(d_model: usize, variant: EmbeddingVariant, seed: u64) -> Self {
        Self::with_sizes(d_model, variant, DEFAULT_VOCAB, DEFAULT_CLASSES, seed)
    }

    /// # Panics
    /// If `d_model < 4`, `vocab == 0` or `classes < 2`.
    pub fn with_sizes(d_model: usize, variant: EmbeddingVariant, vocab: usize, classes: usize, seed: u64) -> Self {
        assert!(d_model >= 4, "d_model must be >= 4");
        assert!(vocab >= 1 && classes >= 2, "need a vocabulary and at least two classes");
        let mut rng = SplitMix64::new(seed ^ 0x1AB_E15);
        let targets = (0..vocab)
            .map(|_| {
                let mut z: Vec<f64> = rng.normals(classes).into_iter().map(|v| TARGET_SHARPNESS * v).collect();
                softmax_in_place(&mut z);
                z
            })
            .collect();
        Self {
            d_model,
            variant,
            vocab,
            classes,
            seed,
            targets,
        }
    }

    pub fn multiplier(&self) -> f64 {
        self.variant.init_and_multiplier(self.d_model).1
    }

    /// Mean entropy of the token distributions, the minimum of the full loss.
    pub fn entropy(&self) -> f64 {
        let total: f64 = self
            .targets
            .iter()
            .flat_map(|p| p.iter())
            .filter(|&&q| q > 0.0)
            .map(|&q| -q * q.ln())
            .sum();
        total / self.vocab as f64
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
}

fn sample(rng: &mut SplitMix64, p: &[f64]) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (k, &q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

impl Problem for EmbeddingScaleProblem {
    fn name(&self) -> &str {
        "embed-scale"
    }

    /// The embedding is the same seeded noise in every variant, rescaled to
    /// RMS exactly equal to the variant's init std. The output layer does
    /// not depend on the variant.
    fn initial_slots(&self) -> Vec<ParamSlot> {
        let d = self.d_model;
        let (std, _) = self.variant.init_and_multiplier(d);
        let mut rng = SplitMix64::new(self.seed);
        let e = normal_with_rms(&mut rng, self.vocab * d, std);
        let w = normal_with_rms(&mut rng, self.classes * d, 1.0 / (d as f64).sqrt());
        vec![
            ParamSlot::new("embedding", ParamValue::from_flat(SlotKind::Matrix { rows: self.vocab, cols: d }, e)),
            ParamSlot::new("output", ParamValue::from_flat(SlotKind::Matrix { rows: self.classes, cols: d }, w)),
        ]
    }

    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>) {
        let e: &DenseMatrix = slot_value(slots, 0, "embedding").as_matrix().expect("embedding is a matrix");
        let w: &DenseMatrix = slot_value(slots, 1, "output").as_matrix().expect("output is a matrix");
        let (d, c) = (self.d_model, self.classes);
        let mult = self.multiplier();
        let mut ge = vec![0.0; self.vocab * d];
        let mut gw = vec![0.0; c * d];
        let mut loss = 0.0;
        let mut logits = vec![0.0; c];
        let scale = 1.0 / self.vocab as f64;
        let mut labels = match batch {
            Batch::Step(t) => Some(SplitMix64::for_step(self.seed, t)),
            Batch::Full => None,
        };
        for (tok, target) in self.targets.iter().enumerate() {
            let emb = e.row(tok);
            for (k, z) in logits.iter_mut().enumerate() {
                *z = mult * w.row(k).iter().zip(emb).map(|(a, b)| a * b).sum::<f64>();
            }
            loss += match labels.as_mut() {
                Some(rng) => softmax_cross_entropy(&mut logits, sample(rng, target)),
                None => soft_cross_entropy(&mut logits, target),
            };
            for (k, &dz) in logits.iter().enumerate() {
                let row = w.row(k);
                for j in 0..d {
                    gw[k * d + j] += dz * mult * emb[j] * scale;
                    ge[tok * d + j] += dz * mult * row[j] * scale;
                }
            }
        }
        (
            loss * scale,
            vec![
                ParamValue::from_flat(SlotKind::Matrix { rows: self.vocab, cols: d }, ge),
                ParamValue::from_flat(SlotKind::Matrix { rows: c, cols: d }, gw),
            ],
        )
    }
}

/// Cross-entropy of `logits` against distribution `p`; overwrites `logits`
/// with `softmax(logits) − p`.
fn soft_cross_entropy(logits: &mut [f64], p: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    for (z, &q) in logits.iter_mut().zip(p) {
        let log_q = *z - max - log_total;
        loss -= q * log_q;
        *z = log_q.exp() - q;
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_variant_init_rms() {
        let d = 64;
        let p = EmbeddingScaleProblem::new(d, EmbeddingVariant::Scaled, 7);
        let rms = p.initial_slots()[0].value.rms();
        assert!((rms - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_and_unit_share_forward_at_init() {
        let d = 16;
        let a = EmbeddingScaleProblem::new(d, EmbeddingVariant::Scaled, 3);
        let b = EmbeddingScaleProblem::new(d, EmbeddingVariant::UnitInit, 3);
        let la = a.loss(&a.initial_slots(), Batch::Full);
        let lb = b.loss(&b.initial_slots(), Batch::Full);
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn full_loss_is_bounded_by_entropy() {
        let p = EmbeddingScaleProblem::new(8, EmbeddingVariant::UnitInit, 2);
        let h = p.entropy();
        assert!(h > 0.1);
        assert!(p.loss(&p.initial_slots(), Batch::Full) >= h);
    }

    #[test]
    fn soft_cross_entropy_matches_hard_for_one_hot() {
        let mut a = vec![0.3, -1.0, 2.0];
        let mut b = a.clone();
        let la = soft_cross_entropy(&mut a, &[0.0, 0.0, 1.0]);
        let lb = softmax_cross_entropy(&mut b, 2);
        assert!((la - lb).abs() < 1e-14);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in EmbeddingVariant::ALL {
            assert_eq!(EmbeddingVariant::parse(v.as_str()), Some(v));
        }
        assert_eq!(EmbeddingVariant::parse("huge"), None);
    }
}
