//! Optimizers: Adam in both its bias-corrected and decay-corrected forms,
//! Adam with factored or row/column-mean second moments, Adafactor for
//! matrices and vectors, and plain SGD.
//!
//! Each trainable parameter lives in a [`ParamSlot`]. Optimizers keep one
//! state per slot and never mix statistics across slots, so slots can be
//! stepped independently. The free functions (`adam_step`,
//! `adafactor_matrix_step`, ...) operate on a single slot; [`Optimizer`]
//! dispatches a whole parameter set and picks the right update path per slot
//! kind.

mod adafactor;
mod adam;
mod clip;
mod factored;
mod memory;
mod state;

pub use adafactor::{
    adafactor_matrix_step, adafactor_vector_step, AdafactorConfig, ClipConfig, DEFAULT_CLIP_THRESHOLD, DEFAULT_EPS1,
    DEFAULT_EPS2,
};
pub use adam::{adam_equivalent_step, adam_step, AdamHyper};
pub use clip::{clip_update, compute_rms_u};
pub use factored::{factored_adam_step, mean_estimator_step, reconstruct_second_moment, MeanVariant};
pub use memory::{memory_footprint, MemoryReport, SlotMemory};
pub use state::{AdamState, FactoredState, MeanState, SlotState, VectorState};

use crate::schedule::{ScheduleError, StepSizeSchedule};
use crate::tensor::{self, DenseMatrix, DenseVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("non-finite gradient in slot `{slot}` at flat index {index}: {value}")]
    NonFiniteGradient {
        slot: String,
        index: usize,
        value: f64,
    },
    #[error("gradient for slot `{slot}` has shape {got:?}, parameter has {expected:?}")]
    ShapeMismatch {
        slot: String,
        expected: SlotKind,
        got: SlotKind,
    },
    #[error("expected {expected} gradients, got {got}")]
    SlotCountMismatch { expected: usize, got: usize },
    #[error("optimizer state for slot `{slot}` does not fit a {kind:?} parameter")]
    StateMismatch { slot: String, kind: SlotKind },
    #[error("invalid hyperparameter {name} = {value}: {reason}")]
    InvalidHyperparameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Matrix { rows: usize, cols: usize },
    Vector(usize),
    Scalar,
}

impl SlotKind {
    pub fn len(&self) -> usize {
        match *self {
            Self::Matrix { rows, cols } => rows * cols,
            Self::Vector(n) => n,
            Self::Scalar => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A parameter or gradient value.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Matrix(DenseMatrix),
    Vector(DenseVector),
    Scalar(f64),
}

impl ParamValue {
    pub fn kind(&self) -> SlotKind {
        match self {
            Self::Matrix(m) => SlotKind::Matrix {
                rows: m.rows(),
                cols: m.cols(),
            },
            Self::Vector(v) => SlotKind::Vector(v.len()),
            Self::Scalar(_) => SlotKind::Scalar,
        }
    }

    /// Zero value of the given shape.
    pub fn zeros(kind: SlotKind) -> Self {
        match kind {
            SlotKind::Matrix { rows, cols } => Self::Matrix(DenseMatrix::zeros(rows, cols)),
            SlotKind::Vector(n) => Self::Vector(DenseVector::zeros(n)),
            SlotKind::Scalar => Self::Scalar(0.0),
        }
    }

    /// Rebuilds a value of shape `kind` from flat row-major data.
    ///
    /// # Panics
    /// If `data.len()` does not match `kind`.
    pub fn from_flat(kind: SlotKind, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), kind.len(), "flat data does not match {kind:?}");
        let mut value = Self::zeros(kind);
        value.as_mut_slice().copy_from_slice(&data);
        value
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Self::Matrix(m) => m.as_slice(),
            Self::Vector(v) => v.as_slice(),
            Self::Scalar(x) => std::slice::from_ref(x),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            Self::Matrix(m) => m.as_mut_slice(),
            Self::Vector(v) => v.as_mut_slice(),
            Self::Scalar(x) => std::slice::from_mut(x),
        }
    }

    pub fn len(&self) -> usize {
        self.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.as_slice().is_empty()
    }

    pub fn rms(&self) -> f64 {
        tensor::rms(self.as_slice())
    }

    pub fn as_matrix(&self) -> Option<&DenseMatrix> {
        match self {
            Self::Matrix(m) => Some(m),
            _ => None,
        }
    }
}

/// A named trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub value: ParamValue,
}

impl ParamSlot {
    pub fn new(name: impl Into<String>, value: ParamValue) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }

    pub fn kind(&self) -> SlotKind {
        self.value.kind()
    }
}

/// Per-slot diagnostics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub t: u64,
    /// Absolute step size applied at this step.
    pub alpha: f64,
    /// RMS of the unscaled update `g / √v̂` before clipping.
    pub rms_u: f64,
    /// RMS of the parameter after the update.
    pub rms_x: f64,
    pub clipped: bool,
}

pub(crate) fn check_gradient(slot: &str, x: &[f64], g: &[f64]) -> Result<(), OptimError> {
    if x.len() != g.len() {
        return Err(OptimError::ShapeMismatch {
            slot: slot.to_string(),
            expected: SlotKind::Vector(x.len()),
            got: SlotKind::Vector(g.len()),
        });
    }
    check_finite(slot, g)
}

pub(crate) fn check_finite(slot: &str, g: &[f64]) -> Result<(), OptimError> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(OptimError::NonFiniteGradient {
            slot: slot.to_string(),
            index,
            value: g[index],
        }),
        None => Ok(()),
    }
}

fn check_hyper(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), OptimError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(OptimError::InvalidHyperparameter { name, value, reason })
    }
}

/// `x ← x − lr · g`.
pub fn sgd_step(x: &mut [f64], g: &[f64], lr: f64) -> Result<(), OptimError> {
    check_gradient("sgd", x, g)?;
    tensor::axpy(x, -lr, g);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: StepSizeSchedule,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: StepSizeSchedule::absolute_flat(10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdamForm {
    /// Constant decays with explicit `1/(1 − β^t)` corrections.
    BiasCorrected,
    /// Corrected decay rates `β̂_t` applied directly to hatted accumulators.
    DecayCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub step: StepSizeSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub form: AdamForm,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            step: StepSizeSchedule::absolute_flat(1.0),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            form: AdamForm::BiasCorrected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondMomentEstimator {
    Factored,
    RowMean,
    ColMean,
}

/// Momentum-free Adam whose matrix slots use a reduced second-moment
/// estimator. Vector and scalar slots keep a full accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoredAdamConfig {
    pub step: StepSizeSchedule,
    pub beta2: f64,
    pub eps: f64,
    pub estimator: SecondMomentEstimator,
}

impl Default for FactoredAdamConfig {
    fn default() -> Self {
        Self {
            step: StepSizeSchedule::absolute_flat(1.0),
            beta2: 0.999,
            eps: 1e-8,
            estimator: SecondMomentEstimator::Factored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Sgd(SgdConfig),
    Adam(AdamConfig),
    FactoredAdam(FactoredAdamConfig),
    Adafactor(AdafactorConfig),
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        match self {
            Self::Sgd(c) => Ok(c.lr.validate()?),
            Self::Adam(c) => {
                c.step.validate()?;
                check_hyper("beta1", c.beta1, (0.0..1.0).contains(&c.beta1), "must lie in [0, 1)")?;
                check_hyper("beta2", c.beta2, c.beta2 > 0.0 && c.beta2 < 1.0, "must lie in (0, 1)")?;
                check_hyper("eps", c.eps, c.eps >= 0.0, "must be nonnegative")
            }
            Self::FactoredAdam(c) => {
                c.step.validate()?;
                check_hyper("beta2", c.beta2, c.beta2 > 0.0 && c.beta2 < 1.0, "must lie in (0, 1)")?;
                check_hyper("eps", c.eps, c.eps >= 0.0, "must be nonnegative")
            }
            Self::Adafactor(c) => c.validate(),
        }
    }

    /// Fresh zero state for a slot of shape `kind`.
    pub fn init_state(&self, kind: SlotKind) -> SlotState {
        let len = kind.len();
        match (self, kind) {
            (Self::Sgd(_), _) => SlotState::Sgd { t: 0 },
            (Self::Adam(c), _) => SlotState::Adam(AdamState::new(len, c.beta1 > 0.0)),
            (Self::FactoredAdam(c), SlotKind::Matrix { rows, cols }) => match c.estimator {
                SecondMomentEstimator::Factored => {
                    SlotState::Factored(FactoredState::new(rows, cols, false))
                }
                SecondMomentEstimator::RowMean => SlotState::Mean(MeanState::new(rows)),
                SecondMomentEstimator::ColMean => SlotState::Mean(MeanState::new(cols)),
            },
            (Self::FactoredAdam(_), _) => SlotState::Adam(AdamState::new(len, false)),
            (Self::Adafactor(c), SlotKind::Matrix { rows, cols }) if c.factored => {
                SlotState::Factored(FactoredState::new(rows, cols, c.beta1 > 0.0))
            }
            (Self::Adafactor(c), _) => SlotState::Vector(VectorState::new(len, c.beta1 > 0.0)),
        }
    }
}

/// An optimizer bound to a fixed set of slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    states: Vec<SlotState>,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, slots: &[ParamSlot]) -> Result<Self, OptimError> {
        config.validate()?;
        let states = slots.iter().map(|s| config.init_state(s.kind())).collect();
        Ok(Self { config, states, t: 0 })
    }

    /// Rebuilds an optimizer from saved states, checking that every state
    /// fits its slot.
    pub fn from_states(
        config: OptimizerConfig,
        slots: &[ParamSlot],
        states: Vec<SlotState>,
    ) -> Result<Self, OptimError> {
        config.validate()?;
        if states.len() != slots.len() {
            return Err(OptimError::SlotCountMismatch {
                expected: slots.len(),
                got: states.len(),
            });
        }
        let mut t = None;
        for (slot, state) in slots.iter().zip(&states) {
            let fresh = config.init_state(slot.kind());
            if !state.same_layout(&fresh) {
                return Err(OptimError::StateMismatch {
                    slot: slot.name.clone(),
                    kind: slot.kind(),
                });
            }
            match t {
                None => t = Some(state.t()),
                Some(t0) if t0 != state.t() => {
                    return Err(OptimError::StateMismatch {
                        slot: slot.name.clone(),
                        kind: slot.kind(),
                    })
                }
                _ => {}
            }
        }
        Ok(Self {
            config,
            states,
            t: t.unwrap_or(0),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn states(&self) -> &[SlotState] {
        &self.states
    }

    /// Number of completed steps.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one step to every slot. Gradients are validated up front, so a
    /// rejected step leaves parameters and states untouched.
    pub fn step(
        &mut self,
        slots: &mut [ParamSlot],
        grads: &[ParamValue],
    ) -> Result<Vec<StepStats>, OptimError> {
        if slots.len() != self.states.len() || grads.len() != slots.len() {
            return Err(OptimError::SlotCountMismatch {
                expected: self.states.len(),
                got: grads.len().min(slots.len()),
            });
        }
        for (slot, g) in slots.iter().zip(grads) {
            if slot.kind() != g.kind() {
                return Err(OptimError::ShapeMismatch {
                    slot: slot.name.clone(),
                    expected: slot.kind(),
                    got: g.kind(),
                });
            }
            check_finite(&slot.name, g.as_slice())?;
        }

        let t = self.t + 1;
        let mut stats = Vec::with_capacity(slots.len());
        for ((slot, g), state) in slots.iter_mut().zip(grads).zip(&mut self.states) {
            stats.push(step_slot(&self.config, state, slot, g, t)?);
        }
        self.t = t;
        Ok(stats)
    }
}

fn step_slot(
    config: &OptimizerConfig,
    state: &mut SlotState,
    slot: &mut ParamSlot,
    g: &ParamValue,
    t: u64,
) -> Result<StepStats, OptimError> {
    let (name, kind) = (slot.name.clone(), slot.kind());
    let mismatch = move || OptimError::StateMismatch { slot: name, kind };
    match (config, state) {
        (OptimizerConfig::Sgd(c), SlotState::Sgd { t: st }) => {
            *st += 1;
            let lr = c.lr.value(*st);
            let grad = g.as_slice();
            let x = slot.value.as_mut_slice();
            tensor::axpy(x, -lr, grad);
            Ok(StepStats {
                t: *st,
                alpha: lr,
                rms_u: tensor::rms(grad),
                rms_x: tensor::rms(x),
                clipped: false,
            })
        }
        (OptimizerConfig::Adam(c), SlotState::Adam(s)) => {
            let hp = AdamHyper {
                alpha: c.step.value(t),
                beta1: c.beta1,
                beta2: c.beta2,
                eps: c.eps,
            };
            let x = slot.value.as_mut_slice();
            match c.form {
                AdamForm::BiasCorrected => adam_step(s, x, g.as_slice(), &hp),
                AdamForm::DecayCorrected => adam_equivalent_step(s, x, g.as_slice(), &hp),
            }
        }
        (OptimizerConfig::FactoredAdam(c), state) => {
            let alpha = c.step.value(t);
            match (state, &mut slot.value, g) {
                (SlotState::Factored(s), ParamValue::Matrix(x), ParamValue::Matrix(gm)) => {
                    factored_adam_step(s, x, gm, alpha, c.beta2, c.eps)
                }
                (SlotState::Mean(s), ParamValue::Matrix(x), ParamValue::Matrix(gm)) => {
                    let variant = match c.estimator {
                        SecondMomentEstimator::ColMean => MeanVariant::ColMean,
                        _ => MeanVariant::RowMean,
                    };
                    mean_estimator_step(variant, s, x, gm, alpha, c.beta2, c.eps)
                }
                (SlotState::Adam(s), x, g) => {
                    let hp = AdamHyper {
                        alpha,
                        beta1: 0.0,
                        beta2: c.beta2,
                        eps: c.eps,
                    };
                    adam_step(s, x.as_mut_slice(), g.as_slice(), &hp)
                }
                _ => Err(mismatch()),
            }
        }
        (OptimizerConfig::Adafactor(c), state) => match (state, &mut slot.value, g) {
            (SlotState::Factored(s), ParamValue::Matrix(x), ParamValue::Matrix(gm)) => {
                adafactor_matrix_step(s, x, gm, c)
            }
            (SlotState::Vector(s), x, g) => adafactor_vector_step(s, x.as_mut_slice(), g.as_slice(), c),
            _ => Err(mismatch()),
        },
        _ => Err(mismatch()),
    }
}
