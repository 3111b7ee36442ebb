//! Small, fully specified pseudo-random generator.
//!
//! Every seeded stream in the crate (problem data, initializations, gradient
//! noise, test fixtures) comes from SplitMix64 so that another implementation
//! can reproduce the exact same numbers from the constants below:
//!
//! ```text
//! state  += 0x9E37_79B9_7F4A_7C15
//! z       = state
//! z       = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z       = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! output  = z ^ (z >> 31)
//! ```
//!
//! Uniform doubles take the top 53 bits: `(output >> 11) * 2^-53`, in `[0, 1)`.
//! Standard normals use the basic Box-Muller transform on two uniforms,
//! `sqrt(-2 ln(1 - u1)) * cos(2π u2)`, discarding the sine branch.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for `(seed, step)`, used for per-step noise so that
    /// evaluation at a given step never depends on call history.
    pub fn for_step(seed: u64, step: u64) -> Self {
        let mut base = Self::new(seed ^ step.wrapping_mul(MIX_2));
        let state = base.next_u64();
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.next_f64() * n as f64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}
