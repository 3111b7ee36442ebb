use super::{batch_indices, sigmoid, slot_value, softmax_cross_entropy, softplus, Batch, Problem};
use crate::optim::{ParamSlot, ParamValue, SlotKind};
use crate::rng::SplitMix64;
use crate::tensor::{DenseMatrix, DenseVector};

/// Minimum teacher margin kept when sampling examples.
const MARGIN: f64 = 0.5;

/// Linear classifier on synthetic data separable by a seeded teacher with
/// margin. With two classes the weight is a `Vector` slot plus a `Scalar`
/// bias; with more classes it is a `Matrix` (classes × features) plus a
/// `Vector` bias.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub n_features: usize,
    pub n_examples: usize,
    pub batch: usize,
    pub classes: usize,
    pub seed: u64,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl LogisticRegression {
    /// Binary variant.
    pub fn new(n_features: usize, n_examples: usize, batch: usize, seed: u64) -> Self {
        Self::with_classes(n_features, n_examples, batch, 2, seed)
    }

    /// # Panics
    /// If any size is zero, `batch > n_examples`, or `classes < 2`.
    pub fn with_classes(n_features: usize, n_examples: usize, batch: usize, classes: usize, seed: u64) -> Self {
        assert!(n_features >= 1 && n_examples >= 1 && batch >= 1, "sizes must be positive");
        assert!(batch <= n_examples, "batch must not exceed the number of examples");
        assert!(classes >= 2, "need at least two classes");
        let mut rng = SplitMix64::new(seed);
        let teacher: Vec<Vec<f64>> = (0..classes)
            .map(|_| {
                let w = rng.normals(n_features);
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                w.into_iter().map(|v| v / norm).collect()
            })
            .collect();
        let mut features = Vec::with_capacity(n_examples);
        let mut labels = Vec::with_capacity(n_examples);
        while features.len() < n_examples {
            let x = rng.normals(n_features);
            let scores: Vec<f64> = if classes == 2 {
                let z: f64 = teacher[0].iter().zip(&x).map(|(a, b)| a * b).sum();
                vec![-z, z]
            } else {
                teacher.iter().map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum()).collect()
            };
            let (best, gap) = top_two_gap(&scores);
            let needed = if classes == 2 { 2.0 * MARGIN } else { MARGIN };
            if gap >= needed {
                features.push(x);
                labels.push(best);
            }
        }
        Self {
            n_features,
            n_examples,
            batch,
            classes,
            seed,
            features,
            labels,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.classes == 2
    }

    pub fn example(&self, i: usize) -> (&[f64], usize) {
        (&self.features[i], self.labels[i])
    }

    fn binary(&self, slots: &[ParamSlot], idx: &[usize]) -> (f64, Vec<ParamValue>) {
        let w = slot_value(slots, 0, "w").as_slice();
        let b = slot_value(slots, 1, "b").as_slice()[0];
        let mut gw = vec![0.0; self.n_features];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for &i in idx {
            let x = &self.features[i];
            let y = if self.labels[i] == 1 { 1.0 } else { -1.0 };
            let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
            loss += softplus(-y * z);
            let dz = -y * sigmoid(-y * z);
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += dz * xi;
            }
            gb += dz;
        }
        let scale = 1.0 / idx.len() as f64;
        gw.iter_mut().for_each(|g| *g *= scale);
        (
            loss * scale,
            vec![
                ParamValue::from_flat(SlotKind::Vector(self.n_features), gw),
                ParamValue::Scalar(gb * scale),
            ],
        )
    }

    fn multiclass(&self, slots: &[ParamSlot], idx: &[usize]) -> (f64, Vec<ParamValue>) {
        let w = slot_value(slots, 0, "w").as_matrix().expect("weight slot is a matrix");
        let b = slot_value(slots, 1, "b").as_slice();
        let (c, d) = (self.classes, self.n_features);
        let mut gw = vec![0.0; c * d];
        let mut gb = vec![0.0; c];
        let mut loss = 0.0;
        let mut logits = vec![0.0; c];
        for &i in idx {
            let x = &self.features[i];
            for (k, z) in logits.iter_mut().enumerate() {
                *z = w.row(k).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[k];
            }
            loss += softmax_cross_entropy(&mut logits, self.labels[i]);
            for k in 0..c {
                gb[k] += logits[k];
                for (g, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *g += logits[k] * xi;
                }
            }
        }
        let scale = 1.0 / idx.len() as f64;
        gw.iter_mut().for_each(|g| *g *= scale);
        gb.iter_mut().for_each(|g| *g *= scale);
        (
            loss * scale,
            vec![
                ParamValue::from_flat(SlotKind::Matrix { rows: c, cols: d }, gw),
                ParamValue::from_flat(SlotKind::Vector(c), gb),
            ],
        )
    }
}

fn top_two_gap(scores: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let second = scores
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != best)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, scores[best] - second)
}

impl Problem for LogisticRegression {
    fn name(&self) -> &str {
        "logreg"
    }

    /// All-zero weights and biases.
    fn initial_slots(&self) -> Vec<ParamSlot> {
        if self.is_binary() {
            vec![
                ParamSlot::new("w", ParamValue::Vector(DenseVector::zeros(self.n_features))),
                ParamSlot::new("b", ParamValue::Scalar(0.0)),
            ]
        } else {
            vec![
                ParamSlot::new("w", ParamValue::Matrix(DenseMatrix::zeros(self.classes, self.n_features))),
                ParamSlot::new("b", ParamValue::Vector(DenseVector::zeros(self.classes))),
            ]
        }
    }

    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>) {
        let idx = batch_indices(self.seed, batch, self.n_examples, self.batch);
        if self.is_binary() {
            self.binary(slots, &idx)
        } else {
            self.multiclass(slots, &idx)
        }
    }

    fn optimum(&self) -> Option<f64> {
        Some(0.0)
    }
}
