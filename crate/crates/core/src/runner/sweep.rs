//! Runs every `*.cfg` file in a directory and tabulates the results.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::parse_config;
use super::experiment::{run_experiment, ExitStatus, Outcome};

pub const SWEEP_HEADER: &str = "config,optimizer,decay,clip,schedule,status,steps,final_loss";

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Completed,
    Diverged,
    /// The file could not be parsed or run; the message says why.
    Failed { status: ExitStatus, message: String },
}

impl SweepStatus {
    fn label(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::Diverged => "diverged",
            Self::Failed {
                status: ExitStatus::ConfigError,
                ..
            } => "config-error",
            Self::Failed { .. } => "io-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: String,
    pub optimizer: String,
    pub decay: String,
    pub clip: String,
    pub schedule: String,
    pub status: SweepStatus,
    pub steps: u64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    /// `ConfigError` if any file failed to parse, `IoError` if any run hit
    /// an I/O failure, `Success` otherwise. Divergence is a result, not a
    /// failure.
    pub fn status(&self) -> ExitStatus {
        let failed = |s: ExitStatus| {
            self.rows
                .iter()
                .any(|r| matches!(&r.status, SweepStatus::Failed { status, .. } if *status == s))
        };
        if failed(ExitStatus::ConfigError) {
            ExitStatus::ConfigError
        } else if failed(ExitStatus::IoError) {
            ExitStatus::IoError
        } else {
            ExitStatus::Success
        }
    }
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{:e}",
                r.config,
                r.optimizer,
                r.decay,
                r.clip,
                r.schedule,
                r.status.label(),
                r.steps,
                r.final_loss
            )?;
        }
        Ok(())
    }
}

fn config_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    files.sort();
    Ok(files)
}

fn failed_row(name: String, status: ExitStatus, message: String) -> SweepRow {
    SweepRow {
        config: name,
        optimizer: "-".into(),
        decay: "-".into(),
        clip: "-".into(),
        schedule: "-".into(),
        status: SweepStatus::Failed { status, message },
        steps: 0,
        final_loss: f64::NAN,
    }
}

fn run_one(path: &Path, trace_dir: Option<&Path>) -> SweepRow {
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return failed_row(name, ExitStatus::IoError, e.to_string()),
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return failed_row(name, ExitStatus::ConfigError, e.to_string()),
    };
    let result = match trace_dir {
        Some(dir) => File::create(dir.join(format!("{name}.trace.csv")))
            .map_err(Into::into)
            .and_then(|f| run_experiment(&config, BufWriter::new(f))),
        None => run_experiment(&config, io::sink()),
    };
    match result {
        Ok(report) => SweepRow {
            config: name,
            optimizer: config.optimizer_kind.as_str().into(),
            decay: config.decay_label(),
            clip: config.clip_label(),
            schedule: config.schedule_label(),
            status: match report.outcome {
                Outcome::Completed => SweepStatus::Completed,
                Outcome::Diverged { .. } => SweepStatus::Diverged,
            },
            steps: report.steps,
            final_loss: report.final_loss,
        },
        Err(e) => failed_row(name, e.status(), e.to_string()),
    }
}

/// Runs every `*.cfg` in `dir` (sorted by file name) on worker threads.
/// With `trace_dir`, each run's trace goes to `<stem>.trace.csv` there.
pub fn sweep(dir: &Path, trace_dir: Option<&Path>) -> io::Result<SweepSummary> {
    let files = config_files(dir)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(files.len().max(1));
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; files.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = files.get(i) else { break };
                let row = run_one(path, trace_dir);
                rows.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    let rows = rows
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every file ran"))
        .collect();
    Ok(SweepSummary { rows })
}
