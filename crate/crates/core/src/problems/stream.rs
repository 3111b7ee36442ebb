use super::{slot_value, Batch, Problem};
use crate::optim::{ParamSlot, ParamValue, SlotKind};

/// Per-step gradients for a single slot, independent of parameter values.
pub trait GradientStream: Send + Sync {
    fn kind(&self) -> SlotKind;

    /// Gradient at 1-indexed step `t`.
    fn gradient(&self, t: u64) -> ParamValue;
}

/// Every entry equals `low` for `t ≤ t_jump` and `high` afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleJumpStream {
    pub t_jump: u64,
    pub low: f64,
    pub high: f64,
    pub kind: SlotKind,
}

impl ScaleJumpStream {
    /// # Panics
    /// If `t_jump == 0` or a magnitude is not positive.
    pub fn new(t_jump: u64, low: f64, high: f64, kind: SlotKind) -> Self {
        assert!(t_jump >= 1, "t_jump must be >= 1");
        assert!(low > 0.0 && high > 0.0, "magnitudes must be positive");
        Self { t_jump, low, high, kind }
    }

    pub fn magnitude(&self, t: u64) -> f64 {
        if t <= self.t_jump {
            self.low
        } else {
            self.high
        }
    }
}

impl Default for ScaleJumpStream {
    /// Jump at step 2000 from 1 to 10 on an 8×8 slot.
    fn default() -> Self {
        Self::new(2000, 1.0, 10.0, SlotKind::Matrix { rows: 8, cols: 8 })
    }
}

impl GradientStream for ScaleJumpStream {
    fn kind(&self) -> SlotKind {
        self.kind
    }

    fn gradient(&self, t: u64) -> ParamValue {
        ParamValue::from_flat(self.kind, vec![self.magnitude(t); self.kind.len()])
    }
}

/// Wraps a stream as the linear objective `⟨g_t, x⟩`, whose gradient is
/// the stream itself. `Batch::Full` evaluates the step-1 gradient.
#[derive(Debug, Clone)]
pub struct StreamProblem<S = ScaleJumpStream> {
    pub stream: S,
}

impl<S: GradientStream> StreamProblem<S> {
    pub fn new(stream: S) -> Self {
        Self { stream }
    }
}

impl<S: GradientStream> Problem for StreamProblem<S> {
    fn name(&self) -> &str {
        "stream-jump"
    }

    fn initial_slots(&self) -> Vec<ParamSlot> {
        vec![ParamSlot::new("x", ParamValue::zeros(self.stream.kind()))]
    }

    fn loss_and_grad(&self, slots: &[ParamSlot], batch: Batch) -> (f64, Vec<ParamValue>) {
        let t = match batch {
            Batch::Full => 1,
            Batch::Step(t) => t,
        };
        let g = self.stream.gradient(t);
        let x = slot_value(slots, 0, "x").as_slice();
        let loss = x.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        (loss, vec![g])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_before_and_after_jump() {
        let s = ScaleJumpStream::new(5, 1.0, 10.0, SlotKind::Vector(3));
        for t in 1..=5 {
            assert!(s.gradient(t).as_slice().iter().all(|&v| v == 1.0));
        }
        assert!(s.gradient(6).as_slice().iter().all(|&v| v == 10.0));
    }

    #[test]
    fn problem_gradient_is_stream() {
        let p = StreamProblem::new(ScaleJumpStream::default());
        let slots = p.initial_slots();
        let (loss, g) = p.loss_and_grad(&slots, Batch::Step(2001));
        assert_eq!(loss, 0.0);
        assert_eq!(g[0], p.stream.gradient(2001));
    }
}
