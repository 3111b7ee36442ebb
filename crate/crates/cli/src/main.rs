use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adafactor::runner::{
    hex, parse_config, sweep, Checkpoint, Experiment, ExitStatus, ExperimentConfig, HashPolicy, Outcome, RunError,
    RunReport, SweepStatus, TraceWriter,
};
use clap::{Parser, Subcommand};

/// Run optimizer experiments on synthetic problems and write CSV traces.
///
/// Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
#[derive(Debug, Parser)]
#[command(name = "adafactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        config: PathBuf,
        /// Trace CSV destination (default: stdout).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Override `steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Override `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every `*.cfg` in a directory and print a summary table.
    Sweep {
        dir: PathBuf,
        /// Directory for per-config trace files.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        /// Config to resume under (default: the one stored in the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Proceed with a warning when the config hash differs.
        #[arg(long)]
        allow_config_mismatch: bool,
        /// Trace CSV destination (default: stdout).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Override the total step count.
        #[arg(long)]
        steps: Option<u64>,
        /// Override `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn apply_overrides(config: &mut ExperimentConfig, steps: Option<u64>, seed: Option<u64>) {
    if let Some(s) = steps {
        config.set_steps(s);
    }
    if let Some(s) = seed {
        config.set_seed(s);
    }
}

fn trace_sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(experiment: &Experiment, report: &RunReport) -> ExitStatus {
    let outcome = match report.outcome {
        Outcome::Completed => "completed".to_string(),
        Outcome::Diverged { step } => format!("diverged at step {step}"),
    };
    eprintln!(
        "{}: {} after {} steps, final loss {:e}",
        experiment.config().optimizer_kind.as_str(),
        outcome,
        report.steps,
        report.final_loss
    );
    eprintln!("{}", experiment.memory_report());
    report.status()
}

fn run(config: &Path, trace_out: Option<&Path>, steps: Option<u64>, seed: Option<u64>) -> Result<ExitStatus, RunError> {
    let mut config = load_config(config)?;
    apply_overrides(&mut config, steps, seed);
    let mut experiment = Experiment::new(config)?;
    let mut trace = TraceWriter::new(trace_sink(trace_out)?)?;
    let report = experiment.run(&mut trace)?;
    Ok(finish(&experiment, &report))
}

fn resume(
    checkpoint: &Path,
    config: Option<&Path>,
    allow_mismatch: bool,
    trace_out: Option<&Path>,
    steps: Option<u64>,
    seed: Option<u64>,
) -> Result<ExitStatus, RunError> {
    let saved = Checkpoint::load(checkpoint)?;
    let mut config = match config {
        Some(p) => load_config(p)?,
        None => parse_config(&saved.config_text)?,
    };
    apply_overrides(&mut config, steps, seed);
    let policy = if allow_mismatch {
        HashPolicy::Warn
    } else {
        HashPolicy::Reject
    };
    if let Some(warning) = saved.check_config(&config, policy)? {
        eprintln!("{warning}");
    }
    eprintln!(
        "resuming from step {} (config {})",
        saved.step,
        &hex(&saved.config_hash)[..16]
    );
    let mut experiment = Experiment::from_checkpoint(config, saved)?;
    let mut trace = TraceWriter::new(trace_sink(trace_out)?)?;
    let report = experiment.run(&mut trace)?;
    Ok(finish(&experiment, &report))
}

fn run_sweep(dir: &Path, trace_out: Option<&Path>) -> Result<ExitStatus, RunError> {
    if let Some(d) = trace_out {
        std::fs::create_dir_all(d)?;
    }
    let summary = sweep(dir, trace_out)?;
    print!("{summary}");
    for row in &summary.rows {
        if let SweepStatus::Failed { message, .. } = &row.status {
            eprintln!("{}: {}", row.config, message.replace('\n', "; "));
        }
    }
    Ok(summary.status())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            trace_out,
            steps,
            seed,
        } => run(config, trace_out.as_deref(), *steps, *seed),
        Command::Sweep { dir, trace_out } => run_sweep(dir, trace_out.as_deref()),
        Command::Resume {
            checkpoint,
            config,
            allow_config_mismatch,
            trace_out,
            steps,
            seed,
        } => resume(
            checkpoint,
            config.as_deref(),
            *allow_config_mismatch,
            trace_out.as_deref(),
            *steps,
            *seed,
        ),
    };
    let status = match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    };
    ExitCode::from(status.code() as u8)
}
