use super::{batch_indices, slot_value, Batch, Problem};
use crate::optim::{ParamSlot, ParamValue, SlotKind};
use crate::rng::SplitMix64;
use crate::tensor::{DenseMatrix, DenseVector};

pub const DEFAULT_EXAMPLES: usize = 256;
pub const DEFAULT_TARGET_NOISE: f64 = 0.3;

/// Regression with `ŷ = W₂ · tanh(W₁ x + b₁)` against targets produced by a
/// seeded teacher network of the same shape plus fixed Gaussian noise, so
/// the attainable loss is bounded away from zero.
///
/// Slots, in order: `w1` (hidden × in), `b1` (hidden), `w2` (out × hidden).
/// The loss is `(1/2B) Σ ‖ŷ − y‖²` over the batch.
#[derive(Debug, Clone)]
pub struct TwoLayerNet {
    pub d_in: usize,
    pub d_hidden: usize,
    pub d_out: usize,
    pub n_examples: usize,
    pub batch: usize,
    pub target_noise: f64,
    pub seed: u64,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn gaussian_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, std: f64) -> DenseMatrix {
    let data = rng.normals(rows * cols).into_iter().map(|v| v * std).collect();
    DenseMatrix::new(rows, cols, data).expect("finite gaussian data")
}

fn forward(w1: &DenseMatrix, b1: &[f64], w2: &DenseMatrix, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = (0..w1.rows())
        .map(|i| (w1.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[i]).tanh())
        .collect();
    let y = (0..w2.rows())
        .map(|k| w2.row(k).iter().zip(&h).map(|(a, b)| a * b).sum())
        .collect();
    (h, y)
}

impl TwoLayerNet {
    /// Full-batch problem on [`DEFAULT_EXAMPLES`] examples.
    pub fn new(d_in: usize, d_hidden: usize, d_out: usize, seed: u64) -> Self {
        Self::with_data(d_in, d_hidden, d_out, DEFAULT_EXAMPLES, DEFAULT_EXAMPLES, DEFAULT_TARGET_NOISE, seed)
    }

    /// # Panics
    /// If a layer width is below 2, or the batch is empty or larger than
    /// the example count.
    pub fn with_data(
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        n_examples: usize,
        batch: usize,
        target_noise: f64,
        seed: u64,
    ) -> Self {
        assert!(d_in >= 2 && d_hidden >= 2 && d_out >= 2, "layer widths must be >= 2");
        assert!(batch >= 1 && batch <= n_examples, "batch must be in 1..=n_examples");
        let mut rng = SplitMix64::new(seed ^ 0x7EAC_4E12);
        let t1 = gaussian_matrix(&mut rng, d_hidden, d_in, 2.0 / (d_in as f64).sqrt());
        let tb = rng.normals(d_hidden).into_iter().map(|v| 0.5 * v).collect::<Vec<_>>();
        let t2 = gaussian_matrix(&mut rng, d_out, d_hidden, 1.0 / (d_hidden as f64).sqrt());
        let inputs: Vec<Vec<f64>> = (0..n_examples).map(|_| rng.normals(d_in)).collect();
        let targets = inputs
            .iter()
            .map(|x| {
                let mut y = forward(&t1, &tb, &t2, x).1;
                y.iter_mut().for_each(|v| *v += target_noise * rng.normal());
                y
            })
            .collect();
        Self {
            d_in,
            d_hidden,
            d_out,
            n_examples,
            batch,
            target_noise,
            seed,
            inputs,
            targets,
        }
    }

    /// Loss and gradients on explicit `(inputs, targets)` pairs.
    ///
    /// # Panics
    /// If `inputs` is empty or its length differs from `targets`.
    pub fn loss_and_grad_on(&self, slots: &[ParamSlot], inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<ParamValue>) {
        assert!(!inputs.is_empty() && inputs.len() == targets.len(), "need matching non-empty batch");
        let w1 = slot_value(slots, 0, "w1").as_matrix().expect("w1 is a matrix");
        let b1 = slot_value(slots, 1, "b1").as_slice();
        let w2 = slot_value(slots, 2, "w2").as_matrix().expect("w2 is a matrix");
        let (h_dim, i_dim) = (self.d_hidden, self.d_in);
        let mut g1 = vec![0.0; h_dim * i_dim];
        let mut gb = vec![0.0; h_dim];
        let mut g2 = vec![0.0; self.d_out * h_dim];
        let mut loss = 0.0;
        let scale = 1.0 / inputs.len() as f64;
        for (x, y) in inputs.iter().zip(targets) {
            let (h, out) = forward(w1, b1, w2, x);
            let err: Vec<f64> = out.iter().zip(y).map(|(a, b)| a - b).collect();
            loss += 0.5 * err.iter().map(|e| e * e).sum::<f64>();
            let mut dh = vec![0.0; h_dim];
            for (k, &e) in err.iter().enumerate() {
                let row = w2.row(k);
                for j in 0..h_dim {
                    g2[k * h_dim + j] += e * h[j];
                    dh[j] += row[j] * e;
                }
            }
            for j in 0..h_dim {
                let delta = dh[j] * (1.0 - h[j] * h[j]);
                gb[j] += delta;
                for (g, xi) in g1[j * i_dim..(j + 1) * i_dim].iter_mut().zip(x) {
                    *g += delta * xi;
                }
            }
        }
        for g in g1.iter_mut().chain(gb.iter_mut()).chain(g2.iter_mut()) {
            *g *= scale;
        }
        (
            loss * scale,
            vec![
                ParamValue::from_flat(SlotKind::Matrix { rows: h_dim, cols: i_dim }, g1),
                ParamValue::from_flat(SlotKind::Vector(h_dim), gb),
                ParamValue::from_flat(SlotKind::Matrix { rows: self.d_out, cols: h_dim }, g2),
            ],
        )
    }
}

impl Problem for TwoLayerNet {
    fn name(&self) -> &str {
        "mlp"
    }

    /// Gaussian weights with fan-in scaling, zero bias.
    fn initial_slots(&self) -> Vec<ParamSlot> {
        let mut rng = SplitMix64::new(self.seed);
        let w1 = gaussian_matrix(&mut rng, self.d_hidden, self.d_in, 1.0 / (self.d_in as f64).sqrt());
        let w2 = gaussian_matrix(&mut rng, self.d_out, self.d_hidden, 1.0 / (self.d_hidden as f64).sqrt());
        vec![
            ParamSlot::new("w1", ParamValue::Matrix(w1)),
            ParamSlot::new("b1", ParamValue::Vector(DenseVector::zeros(self.d_hidden))),
            ParamSlot::new("w2", ParamValue::Matrix(w2)),
        ]
    }

    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>) {
        let idx = batch_indices(self.seed, batch, self.n_examples, self.batch);
        let inputs: Vec<Vec<f64>> = idx.iter().map(|&i| self.inputs[i].clone()).collect();
        let targets: Vec<Vec<f64>> = idx.iter().map(|&i| self.targets[i].clone()).collect();
        self.loss_and_grad_on(slots, &inputs, &targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_inputs_give_zero_first_layer_gradient() {
        let p = TwoLayerNet::new(3, 4, 2, 5);
        let slots = p.initial_slots();
        let inputs = vec![vec![0.0; 3]; 4];
        let targets = vec![vec![1.0, -1.0]; 4];
        let (_, g) = p.loss_and_grad_on(&slots, &inputs, &targets);
        assert!(g[0].as_slice().iter().all(|&v| v == 0.0));
        assert!(g[2].as_slice().iter().all(|&v| v == 0.0));
        assert!(g[1].as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn student_starts_away_from_teacher() {
        let p = TwoLayerNet::new(6, 8, 3, 1);
        let loss = p.loss(&p.initial_slots(), Batch::Full);
        assert!(loss > 0.05, "initial loss {loss}");
    }

    #[test]
    fn slot_shapes() {
        let p = TwoLayerNet::new(6, 8, 3, 1);
        let kinds: Vec<SlotKind> = p.initial_slots().iter().map(|s| s.kind()).collect();
        assert_eq!(
            kinds,
            vec![
                SlotKind::Matrix { rows: 8, cols: 6 },
                SlotKind::Vector(8),
                SlotKind::Matrix { rows: 3, cols: 8 },
            ]
        );
    }
}
