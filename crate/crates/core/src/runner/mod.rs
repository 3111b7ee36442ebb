//! Experiment harness: configuration, the training loop, trace output,
//! checkpoints and config sweeps.

mod checkpoint;
mod config;
mod experiment;
mod sweep;
mod trace;

pub use checkpoint::{
    accumulator_payload_bytes, encode_states, hex, Checkpoint, CheckpointError, HashPolicy, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{parse_config, ConfigError, ConfigErrors, ExperimentConfig, OptimizerKind, ProblemConfig, REQUIRED_KEYS};
pub use experiment::{run_experiment, Experiment, ExitStatus, Outcome, RunError, RunReport};
pub use sweep::{sweep, SweepRow, SweepStatus, SweepSummary, SWEEP_HEADER};
pub use trace::{SlotTrace, TraceRecord, TraceWriter, TRACE_HEADER};
