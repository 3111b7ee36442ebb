//! Step-size and decay-rate schedules as pure functions of the 1-indexed
//! step counter `t`.
//!
//! Step sizes follow the inverse-square-root family, either with a linear
//! warmup, `scale · min(slope · t, 1/√t)`, or flat until the crossover,
//! `scale · min(cap, 1/√t)`. Relative kinds use the same formulas; the
//! optimizer multiplies them by the parameter scale.
//!
//! Second-moment decay rates all start at zero for `t = 1`, which removes the
//! need for a separate bias correction: the weights of past squared gradients
//! in the running average always sum to one.

use thiserror::Error;

pub const DEFAULT_WARMUP_SLOPE: f64 = 1e-6;
pub const DEFAULT_CAP: f64 = 1e-2;
pub const DEFAULT_DECAY_EXPONENT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("decay exponent c must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("decay rate beta must lie in (0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepSizeKind {
    AbsoluteWarmup,
    AbsoluteFlat,
    RelativeWarmup,
    RelativeFlat,
    /// `scale` at every step.
    ConstantMultiple,
}

impl StepSizeKind {
    pub fn is_relative(self) -> bool {
        matches!(self, Self::RelativeWarmup | Self::RelativeFlat)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AbsoluteWarmup => "absolute-warmup",
            Self::AbsoluteFlat => "absolute-flat",
            Self::RelativeWarmup => "relative-warmup",
            Self::RelativeFlat => "relative-flat",
            Self::ConstantMultiple => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::AbsoluteWarmup,
            Self::AbsoluteFlat,
            Self::RelativeWarmup,
            Self::RelativeFlat,
            Self::ConstantMultiple,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeSchedule {
    pub kind: StepSizeKind,
    pub scale: f64,
    pub warmup_slope: f64,
    pub cap: f64,
}

impl StepSizeSchedule {
    pub fn new(kind: StepSizeKind, scale: f64) -> Self {
        Self {
            kind,
            scale,
            warmup_slope: DEFAULT_WARMUP_SLOPE,
            cap: DEFAULT_CAP,
        }
    }

    /// `ρ_t = min(10⁻², 1/√t)`.
    pub fn relative_flat() -> Self {
        Self::new(StepSizeKind::RelativeFlat, 1.0)
    }

    pub fn absolute_flat(scale: f64) -> Self {
        Self::new(StepSizeKind::AbsoluteFlat, scale)
    }

    pub fn absolute_warmup(scale: f64) -> Self {
        Self::new(StepSizeKind::AbsoluteWarmup, scale)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(StepSizeKind::ConstantMultiple, value)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        for (name, value) in [
            ("schedule.scale", self.scale),
            ("schedule.warmup_slope", self.warmup_slope),
            ("schedule.cap", self.cap),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScheduleError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn is_relative(&self) -> bool {
        self.kind.is_relative()
    }

    /// Step size (or relative step size) at step `t`.
    ///
    /// # Panics
    /// If `t == 0`; steps are 1-indexed.
    pub fn value(&self, t: u64) -> f64 {
        assert!(t >= 1, "schedules are 1-indexed, got t = 0");
        let inv_sqrt = 1.0 / (t as f64).sqrt();
        let base = match self.kind {
            StepSizeKind::AbsoluteWarmup | StepSizeKind::RelativeWarmup => {
                (self.warmup_slope * t as f64).min(inv_sqrt)
            }
            StepSizeKind::AbsoluteFlat | StepSizeKind::RelativeFlat => self.cap.min(inv_sqrt),
            StepSizeKind::ConstantMultiple => 1.0,
        };
        self.scale * base
    }
}

impl Default for StepSizeSchedule {
    fn default() -> Self {
        Self::relative_flat()
    }
}

/// Second-moment decay schedule `β̂_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecaySchedule {
    /// `β (1 − β^{t−1}) / (1 − β^t)`: constant-β EMA with the bias
    /// correction folded into the decay rate.
    ConstantBiasCorrected(f64),
    /// `1 − t^{−c}`.
    Increasing(f64),
}

impl DecaySchedule {
    pub fn constant_bias_corrected(beta: f64) -> Result<Self, ScheduleError> {
        let s = Self::ConstantBiasCorrected(beta);
        s.validate()?;
        Ok(s)
    }

    pub fn increasing(c: f64) -> Result<Self, ScheduleError> {
        let s = Self::Increasing(c);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            Self::ConstantBiasCorrected(beta) if !(beta > 0.0 && beta < 1.0) => {
                Err(ScheduleError::BetaOutOfRange(beta))
            }
            Self::Increasing(c) if !(c > 0.0 && c.is_finite()) => {
                Err(ScheduleError::NonPositiveExponent(c))
            }
            _ => Ok(()),
        }
    }

    /// # Panics
    /// If `t == 0`.
    pub fn rate(&self, t: u64) -> f64 {
        assert!(t >= 1, "schedules are 1-indexed, got t = 0");
        match *self {
            Self::ConstantBiasCorrected(beta) => corrected_decay(beta, t),
            Self::Increasing(c) => 1.0 - (t as f64).powf(-c),
        }
    }

    /// Weight of `g_i²` in the running average after step `t`:
    /// `(1 − β̂_i) ∏_{j=i+1}^{t} β̂_j`.
    ///
    /// # Panics
    /// Unless `1 ≤ i ≤ t`.
    pub fn weight_of_past_gradient(&self, i: u64, t: u64) -> f64 {
        assert!(1 <= i && i <= t, "need 1 <= i <= t, got i = {i}, t = {t}");
        ((i + 1)..=t).fold(1.0 - self.rate(i), |w, j| w * self.rate(j))
    }

    /// All weights `w(1, t) ..= w(t, t)` in one backward pass.
    pub fn weights_of_past_gradients(&self, t: u64) -> Vec<f64> {
        let mut weights = vec![0.0; t as usize];
        let mut tail = 1.0;
        for i in (1..=t).rev() {
            let rate = self.rate(i);
            weights[(i - 1) as usize] = (1.0 - rate) * tail;
            tail *= rate;
        }
        weights
    }
}

impl Default for DecaySchedule {
    fn default() -> Self {
        Self::Increasing(DEFAULT_DECAY_EXPONENT)
    }
}

/// `β (1 − β^{t−1}) / (1 − β^t)`; zero at `t = 1`, tends to `β`.
/// `β = 0` is allowed and yields 0 at every step.
///
/// Evaluated as `1 − (1 − β) / (1 − β^t)`, which is algebraically the same
/// and stays monotone in `t` under rounding.
pub fn corrected_decay(beta: f64, t: u64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    1.0 - (1.0 - beta) / (1.0 - beta.powf(t as f64))
}

/// `max(ε₂, scale) · ρ_t`.
pub fn relative_step_size(rho_t: f64, param_scale: f64, eps2: f64) -> f64 {
    eps2.max(param_scale) * rho_t
}
