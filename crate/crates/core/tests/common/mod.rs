//! Independent reference implementations used as test oracles. Each one is
//! a direct, unoptimized transcription of the update it mirrors and shares
//! no code with the library beyond the data types and the seeded generator.

#![allow(dead_code, clippy::needless_range_loop)]

use adafactor::optim::{ParamSlot, ParamValue};
use adafactor::problems::{Batch, Problem};
use adafactor::rng::SplitMix64;
use adafactor::tensor::DenseMatrix;

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform(lo, hi))
}

/// Generalized KL divergence, written out independently.
pub fn i_div(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        q
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln() - p + q
    }
}

pub fn i_div_total(v: &DenseMatrix, r: &[f64], s: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..v.rows() {
        for j in 0..v.cols() {
            total += i_div(v.get(i, j), r[i] * s[j]);
        }
    }
    total
}

/// Rank-1 I-divergence minimization by alternating exact coordinate
/// updates from a random positive start: with `s` fixed the optimal `r_i`
/// is `Σ_j V_ij / Σ_j s_j`, and symmetrically for `s`.
pub fn alternating_rank_one(v: &DenseMatrix, seed: u64, iters: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let mut r: Vec<f64> = (0..v.rows()).map(|_| rng.uniform(0.1, 3.0)).collect();
    let mut s: Vec<f64> = (0..v.cols()).map(|_| rng.uniform(0.1, 3.0)).collect();
    for _ in 0..iters {
        let s_total: f64 = s.iter().sum();
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = (0..v.cols()).map(|j| v.get(i, j)).sum::<f64>() / s_total;
        }
        let r_total: f64 = r.iter().sum();
        for (j, sj) in s.iter_mut().enumerate() {
            *sj = (0..v.rows()).map(|i| v.get(i, j)).sum::<f64>() / r_total;
        }
    }
    (r, s)
}

/// Textbook bias-corrected Adam on a flat parameter vector.
pub struct ReferenceAdam {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ReferenceAdam {
    pub fn new(n: usize, alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            alpha,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / (1.0 - self.beta1.powi(self.t));
            let v_hat = self.v[i] / (1.0 - self.beta2.powi(self.t));
            x[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Adafactor on one slot with a *full* second-moment accumulator, with the
/// row/column statistics recomputed from it at every step. Defaults:
/// relative step `min(1e-2, 1/√t)`, decay `1 − t^{−0.8}`, ε1 = 1e-30,
/// ε2 = 1e-3, clip threshold 1.
pub struct ReferenceAdafactor {
    pub rows: usize,
    pub cols: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub d: Option<f64>,
    pub decay_exponent: f64,
    pub beta1: f64,
    /// Factor the estimate (matrices) or use the accumulator as is (vectors).
    pub factored: bool,
    v: Vec<f64>,
    m: Vec<f64>,
    t: u64,
}

impl ReferenceAdafactor {
    pub fn new(rows: usize, cols: usize, factored: bool) -> Self {
        Self {
            rows,
            cols,
            eps1: 1e-30,
            eps2: 1e-3,
            d: Some(1.0),
            decay_exponent: 0.8,
            beta1: 0.0,
            factored,
            v: vec![0.0; rows * cols],
            m: vec![0.0; rows * cols],
            t: 0,
        }
    }

    /// The full second-moment accumulator.
    pub fn accumulator(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        let t = self.t as f64;
        let n = x.len() as f64;
        let rms_x = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        let rho = (1e-2f64).min(1.0 / t.sqrt());
        let alpha = self.eps2.max(rms_x) * rho;
        let beta2 = 1.0 - t.powf(-self.decay_exponent);
        for k in 0..self.v.len() {
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * (g[k] * g[k] + self.eps1);
        }
        let v_hat: Vec<f64> = if self.factored {
            let row: Vec<f64> = (0..self.rows)
                .map(|i| (0..self.cols).map(|j| self.v[i * self.cols + j]).sum())
                .collect();
            let col: Vec<f64> = (0..self.cols)
                .map(|j| (0..self.rows).map(|i| self.v[i * self.cols + j]).sum())
                .collect();
            let total: f64 = row.iter().sum();
            (0..self.rows * self.cols)
                .map(|k| row[k / self.cols] * col[k % self.cols] / total)
                .collect()
        } else {
            self.v.clone()
        };
        let mut u: Vec<f64> = g.iter().zip(&v_hat).map(|(gk, vk)| gk / vk.sqrt()).collect();
        let rms_u = (u.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if let Some(d) = self.d {
            let denom = (rms_u / d).max(1.0);
            u.iter_mut().for_each(|v| *v /= denom);
        }
        if self.beta1 > 0.0 {
            let b = self.beta1;
            let beta1_t = b * (1.0 - b.powf(t - 1.0)) / (1.0 - b.powf(t));
            for k in 0..u.len() {
                self.m[k] = beta1_t * self.m[k] + (1.0 - beta1_t) * u[k];
            }
            u.copy_from_slice(&self.m);
        }
        for k in 0..x.len() {
            x[k] -= alpha * u[k];
        }
    }
}

/// Largest entrywise relative error between the analytic gradient and
/// central differences with step `h`. Entries where both values are below
/// `floor` in magnitude are compared absolutely against `floor` instead.
pub fn max_fd_relative_error(p: &dyn Problem, slots: &[ParamSlot], batch: Batch, h: f64, floor: f64) -> f64 {
    let (_, grads) = p.loss_and_grad(slots, batch);
    let mut worst: f64 = 0.0;
    for (s, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            let mut plus = slots.to_vec();
            plus[s].value.as_mut_slice()[k] += h;
            let mut minus = slots.to_vec();
            minus[s].value.as_mut_slice()[k] -= h;
            let numeric = (p.loss(&plus, batch) - p.loss(&minus, batch)) / (2.0 * h);
            let analytic = g.as_slice()[k];
            let scale = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// The problem's initial slots plus seeded Gaussian noise of the given RMS.
pub fn perturbed_slots(p: &dyn Problem, seed: u64, rms: f64) -> Vec<ParamSlot> {
    let mut rng = SplitMix64::new(seed);
    p.initial_slots()
        .into_iter()
        .map(|mut s| {
            for v in s.value.as_mut_slice() {
                *v += rms * rng.normal();
            }
            s
        })
        .collect()
}

pub fn flat(values: &[ParamValue]) -> Vec<f64> {
    values.iter().flat_map(|v| v.as_slice().iter().copied()).collect()
}
