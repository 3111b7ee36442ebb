use super::{OptimizerConfig, ParamSlot, SecondMomentEstimator, SlotKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotMemory {
    pub name: String,
    pub kind: SlotKind,
    pub params: usize,
    pub aux: usize,
}

/// Auxiliary values an optimizer keeps, per slot and in total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryReport {
    pub slots: Vec<SlotMemory>,
    pub total_params: usize,
    pub total_aux: usize,
}

fn aux_values(config: &OptimizerConfig, kind: SlotKind) -> usize {
    let len = kind.len();
    let matrix = match kind {
        SlotKind::Matrix { rows, cols } => Some((rows, cols)),
        _ => None,
    };
    match config {
        OptimizerConfig::Sgd(_) => 0,
        OptimizerConfig::Adam(c) => {
            if c.beta1 > 0.0 {
                2 * len
            } else {
                len
            }
        }
        OptimizerConfig::FactoredAdam(c) => match (matrix, c.estimator) {
            (Some((n, m)), SecondMomentEstimator::Factored) => n + m,
            (Some((n, _)), SecondMomentEstimator::RowMean) => n,
            (Some((_, m)), SecondMomentEstimator::ColMean) => m,
            (None, _) => len,
        },
        OptimizerConfig::Adafactor(c) => {
            let momentum = if c.beta1 > 0.0 { len } else { 0 };
            let second = match matrix {
                Some((n, m)) if c.factored => n + m,
                _ => len,
            };
            second + momentum
        }
    }
}

/// Closed-form accounting of optimizer memory for a set of slots.
pub fn memory_footprint(config: &OptimizerConfig, slots: &[ParamSlot]) -> MemoryReport {
    let slots: Vec<SlotMemory> = slots
        .iter()
        .map(|s| SlotMemory {
            name: s.name.clone(),
            kind: s.kind(),
            params: s.kind().len(),
            aux: aux_values(config, s.kind()),
        })
        .collect();
    MemoryReport {
        total_params: slots.iter().map(|s| s.params).sum(),
        total_aux: slots.iter().map(|s| s.aux).sum(),
        slots,
    }
}

impl std::fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "slot,shape,params,aux")?;
        for s in &self.slots {
            let shape = match s.kind {
                SlotKind::Matrix { rows, cols } => format!("{rows}x{cols}"),
                SlotKind::Vector(n) => format!("{n}"),
                SlotKind::Scalar => "scalar".to_string(),
            };
            writeln!(f, "{},{},{},{}", s.name, shape, s.params, s.aux)?;
        }
        write!(f, "total,,{},{}", self.total_params, self.total_aux)
    }
}
