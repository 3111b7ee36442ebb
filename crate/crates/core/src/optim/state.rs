/// Full first/second moment accumulators. `m` is absent when momentum is
/// off. For the decay-corrected form of Adam these hold the hatted values.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Option<Vec<f64>>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, momentum: bool) -> Self {
        Self {
            m: momentum.then(|| vec![0.0; len]),
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Running row sums `r` (length n) and column sums `c` (length m) of the
/// squared gradients, plus an optional full first moment.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredState {
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub m: Option<Vec<f64>>,
    pub t: u64,
}

impl FactoredState {
    pub fn new(rows: usize, cols: usize, momentum: bool) -> Self {
        Self {
            r: vec![0.0; rows],
            c: vec![0.0; cols],
            m: momentum.then(|| vec![0.0; rows * cols]),
            t: 0,
        }
    }
}

/// Unfactored accumulator with the decay schedule applied directly.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    pub v_hat: Vec<f64>,
    pub m: Option<Vec<f64>>,
    pub t: u64,
}

impl VectorState {
    pub fn new(len: usize, momentum: bool) -> Self {
        Self {
            v_hat: vec![0.0; len],
            m: momentum.then(|| vec![0.0; len]),
            t: 0,
        }
    }
}

/// Running per-row (or per-column) means of the squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanState {
    pub acc: Vec<f64>,
    pub t: u64,
}

impl MeanState {
    pub fn new(len: usize) -> Self {
        Self {
            acc: vec![0.0; len],
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlotState {
    Sgd { t: u64 },
    Adam(AdamState),
    Factored(FactoredState),
    Mean(MeanState),
    Vector(VectorState),
}

impl SlotState {
    pub fn t(&self) -> u64 {
        match self {
            Self::Sgd { t } => *t,
            Self::Adam(s) => s.t,
            Self::Factored(s) => s.t,
            Self::Mean(s) => s.t,
            Self::Vector(s) => s.t,
        }
    }

    /// Number of auxiliary values kept for this slot.
    pub fn aux_len(&self) -> usize {
        let opt = |m: &Option<Vec<f64>>| m.as_ref().map_or(0, Vec::len);
        match self {
            Self::Sgd { .. } => 0,
            Self::Adam(s) => opt(&s.m) + s.v.len(),
            Self::Factored(s) => s.r.len() + s.c.len() + opt(&s.m),
            Self::Mean(s) => s.acc.len(),
            Self::Vector(s) => s.v_hat.len() + opt(&s.m),
        }
    }

    /// Accumulator arrays in checkpoint order: `r, c, m, v, v_hat`, each
    /// present only when the state has it.
    pub fn arrays(&self) -> Vec<(&'static str, &[f64])> {
        let mut out = Vec::new();
        match self {
            Self::Sgd { .. } => {}
            Self::Adam(s) => {
                if let Some(m) = &s.m {
                    out.push(("m", m.as_slice()));
                }
                out.push(("v", s.v.as_slice()));
            }
            Self::Factored(s) => {
                out.push(("r", s.r.as_slice()));
                out.push(("c", s.c.as_slice()));
                if let Some(m) = &s.m {
                    out.push(("m", m.as_slice()));
                }
            }
            Self::Mean(s) => out.push(("v", s.acc.as_slice())),
            Self::Vector(s) => {
                if let Some(m) = &s.m {
                    out.push(("m", m.as_slice()));
                }
                out.push(("v_hat", s.v_hat.as_slice()));
            }
        }
        out
    }

    /// Same variant with accumulators of the same lengths.
    pub fn same_layout(&self, other: &SlotState) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
            && self
                .arrays()
                .iter()
                .map(|(n, a)| (*n, a.len()))
                .eq(other.arrays().iter().map(|(n, a)| (*n, a.len())))
    }

    /// True when every second-moment accumulator is elementwise nonnegative.
    pub fn second_moments_nonnegative(&self) -> bool {
        self.arrays()
            .iter()
            .filter(|(name, _)| *name != "m")
            .all(|(_, a)| a.iter().all(|&x| x >= 0.0))
    }
}
