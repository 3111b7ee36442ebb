use super::{normal_with_rms, slot_value, Batch, Problem};
use crate::optim::{ParamSlot, ParamValue, SlotKind};
use crate::rng::SplitMix64;
use crate::tensor::DenseVector;

/// `f(x) = ½ xᵀ A x` with diagonal `A`, eigenvalues log-spaced over
/// `[1, condition_number]`. Training gradients carry additive Gaussian
/// noise `noise_scale · z_t`; the loss itself is noiseless.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    pub n: usize,
    pub condition_number: f64,
    pub noise_scale: f64,
    pub seed: u64,
    eigenvalues: Vec<f64>,
}

impl QuadraticBowl {
    /// # Panics
    /// If `n == 0` or `condition_number < 1`.
    pub fn new(n: usize, condition_number: f64, noise_scale: f64, seed: u64) -> Self {
        assert!(n >= 1, "quadratic needs n >= 1");
        assert!(condition_number >= 1.0, "condition number must be >= 1");
        let eigenvalues = (0..n)
            .map(|k| {
                if n == 1 {
                    1.0
                } else {
                    condition_number.powf(k as f64 / (n - 1) as f64)
                }
            })
            .collect();
        Self {
            n,
            condition_number,
            noise_scale,
            seed,
            eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

impl Problem for QuadraticBowl {
    fn name(&self) -> &str {
        "quad"
    }

    /// Seeded normal start with RMS exactly 1.
    fn initial_slots(&self) -> Vec<ParamSlot> {
        let mut rng = SplitMix64::new(self.seed);
        let x = normal_with_rms(&mut rng, self.n, 1.0);
        vec![ParamSlot::new("x", ParamValue::Vector(DenseVector::new(x).unwrap()))]
    }

    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>) {
        let x = slot_value(slots, 0, "x").as_slice();
        let mut loss = 0.0;
        let mut grad = Vec::with_capacity(self.n);
        for (&xi, &lambda) in x.iter().zip(&self.eigenvalues) {
            loss += 0.5 * lambda * xi * xi;
            grad.push(lambda * xi);
        }
        if let (Batch::Step(t), true) = (batch, self.noise_scale > 0.0) {
            let mut rng = SplitMix64::for_step(self.seed, t);
            for g in grad.iter_mut() {
                *g += self.noise_scale * rng.normal();
            }
        }
        (loss, vec![ParamValue::from_flat(SlotKind::Vector(self.n), grad)])
    }

    fn optimum(&self) -> Option<f64> {
        Some(0.0)
    }
}
