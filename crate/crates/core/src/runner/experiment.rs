use std::io::Write;

use thiserror::Error;

use super::checkpoint::{Checkpoint, CheckpointError};
use super::config::{ConfigErrors, ExperimentConfig};
use super::trace::{SlotTrace, TraceRecord, TraceWriter};
use crate::optim::{memory_footprint, MemoryReport, OptimError, Optimizer, ParamSlot};
use crate::problems::{Batch, Problem};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    ConfigError,
    Diverged,
    IoError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::ConfigError => 2,
            Self::Diverged => 3,
            Self::IoError => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Config(_) | Self::Optim(_) => ExitStatus::ConfigError,
            Self::Checkpoint(CheckpointError::Io(_)) | Self::Io(_) => ExitStatus::IoError,
            Self::Checkpoint(CheckpointError::ConfigHashMismatch { .. }) => ExitStatus::ConfigError,
            Self::Checkpoint(_) => ExitStatus::IoError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// Loss or gradient became non-finite at this step; no update was applied.
    Diverged { step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub outcome: Outcome,
    /// Completed optimizer steps.
    pub steps: u64,
    /// Noiseless loss at the final parameters.
    pub final_loss: f64,
    pub records: usize,
}

impl RunReport {
    pub fn status(&self) -> ExitStatus {
        match self.outcome {
            Outcome::Completed => ExitStatus::Success,
            Outcome::Diverged { .. } => ExitStatus::Diverged,
        }
    }
}

/// A problem, its parameters and an optimizer, advanced one step at a time.
pub struct Experiment {
    config: ExperimentConfig,
    problem: Box<dyn Problem>,
    slots: Vec<ParamSlot>,
    optimizer: Optimizer,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, RunError> {
        let problem = config.problem.build(config.seed);
        let slots = problem.initial_slots();
        let optimizer = Optimizer::new(config.optimizer, &slots)?;
        Ok(Self {
            config,
            problem,
            slots,
            optimizer,
        })
    }

    /// Rebuilds a run from a checkpoint. The caller is responsible for
    /// checking the configuration hash.
    pub fn from_checkpoint(config: ExperimentConfig, checkpoint: Checkpoint) -> Result<Self, RunError> {
        let problem = config.problem.build(config.seed);
        let fresh = problem.initial_slots();
        let layout_ok = fresh.len() == checkpoint.slots.len()
            && fresh
                .iter()
                .zip(&checkpoint.slots)
                .all(|(a, b)| a.name == b.name && a.kind() == b.kind());
        if !layout_ok {
            return Err(CheckpointError::Corrupt("slots do not match the configured problem".into()).into());
        }
        let optimizer = Optimizer::from_states(config.optimizer, &checkpoint.slots, checkpoint.states)?;
        if optimizer.step_count() != checkpoint.step {
            return Err(CheckpointError::Corrupt("state step disagrees with checkpoint step".into()).into());
        }
        Ok(Self {
            config,
            problem,
            slots: checkpoint.slots,
            optimizer,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem.as_ref()
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    /// Completed steps.
    pub fn step_count(&self) -> u64 {
        self.optimizer.step_count()
    }

    pub fn full_loss(&self) -> f64 {
        self.problem.loss(&self.slots, Batch::Full)
    }

    pub fn memory_report(&self) -> MemoryReport {
        memory_footprint(&self.config.optimizer, &self.slots)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config_hash: self.config.hash(),
            config_text: self.config.to_text(),
            step: self.step_count(),
            slots: self.slots.clone(),
            states: self.optimizer.states().to_vec(),
        }
    }

    /// Runs one step. A non-finite loss or gradient leaves everything
    /// unchanged and returns a record with `diverged` set.
    pub fn step(&mut self) -> Result<TraceRecord, RunError> {
        let t = self.step_count() + 1;
        let (loss, grads) = self.problem.loss_and_grad(&self.slots, Batch::Step(t));
        let finite = loss.is_finite() && grads.iter().all(|g| g.as_slice().iter().all(|v| v.is_finite()));
        if !finite {
            let slots = self
                .slots
                .iter()
                .map(|s| SlotTrace {
                    slot: s.name.clone(),
                    rms_u: 0.0,
                    rms_x: s.value.rms(),
                    alpha: 0.0,
                    clipped: false,
                })
                .collect();
            return Ok(TraceRecord {
                t,
                loss,
                slots,
                diverged: true,
            });
        }
        let stats = self.optimizer.step(&mut self.slots, &grads)?;
        let slots = self
            .slots
            .iter()
            .zip(&stats)
            .map(|(s, st)| SlotTrace::from_stats(&s.name, st))
            .collect();
        Ok(TraceRecord {
            t,
            loss,
            slots,
            diverged: false,
        })
    }

    /// Steps until `until` steps are complete or the run diverges. Steps
    /// divisible by `trace_every`, and any diverged step, are traced.
    pub fn run_until<W: Write>(&mut self, until: u64, trace: &mut TraceWriter<W>) -> Result<RunReport, RunError> {
        let every = self.config.trace_every;
        let mut outcome = Outcome::Completed;
        while self.step_count() < until {
            let record = self.step()?;
            if record.diverged {
                trace.write(&record)?;
                outcome = Outcome::Diverged { step: record.t };
                break;
            }
            if record.t % every == 0 {
                trace.write(&record)?;
            }
        }
        trace.flush()?;
        Ok(RunReport {
            outcome,
            steps: self.step_count(),
            final_loss: self.full_loss(),
            records: trace.records(),
        })
    }

    /// Runs to `config.steps` and writes the configured checkpoint, if any.
    pub fn run<W: Write>(&mut self, trace: &mut TraceWriter<W>) -> Result<RunReport, RunError> {
        let report = self.run_until(self.config.steps, trace)?;
        if let Some(path) = &self.config.checkpoint {
            self.checkpoint().save(path)?;
        }
        Ok(report)
    }
}

/// Runs a validated config from scratch, tracing to `out`.
pub fn run_experiment<W: Write>(config: &ExperimentConfig, out: W) -> Result<RunReport, RunError> {
    let mut trace = TraceWriter::new(out)?;
    Experiment::new(config.clone())?.run(&mut trace)
}
