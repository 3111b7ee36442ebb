//! Experiment configuration files.
//!
//! One `key = value` pair per line. Blank lines and lines starting with `#`
//! are ignored. Keys are grouped by dotted prefixes:
//!
//! | key | required | meaning |
//! |-----|----------|---------|
//! | `problem.name` | yes | `quad`, `logreg`, `mlp`, `embed-scale`, `stream-jump` |
//! | `problem.*` | no | problem parameters, see [`ProblemConfig`] |
//! | `optim.kind` | yes | `sgd`, `adam`, `adam-equivalent`, `factored-adam`, `row-mean`, `col-mean`, `adafactor` |
//! | `optim.beta1` | no | first-moment decay (adam kinds, adafactor) |
//! | `optim.eps` | no | denominator epsilon (adam and factored kinds) |
//! | `optim.eps1`, `optim.eps2` | no | adafactor regularizers |
//! | `optim.clip` | no | adafactor clipping threshold `d`, or `none` |
//! | `optim.factored` | no | adafactor: `true` keeps row/column sums for matrices |
//! | `schedule.kind` | no | `absolute-warmup`, `absolute-flat`, `relative-warmup`, `relative-flat`, `constant` |
//! | `schedule.scale`, `schedule.warmup_slope`, `schedule.cap` | no | schedule shape |
//! | `decay.kind` | no | adafactor: `increasing` (`1 − t^{−c}`) or `constant` |
//! | `decay.c` | no | exponent of the increasing schedule |
//! | `decay.beta2` | no | constant second-moment decay |
//! | `steps` | yes | number of training steps |
//! | `seed` | yes | seed for data, initialization and noise |
//! | `trace_every` | no | trace period in steps (default 1) |
//! | `checkpoint` | no | path written when the run ends |
//!
//! A key that does not apply to the chosen problem or optimizer is an
//! error, as is any unknown key. All errors are reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::optim::{
    AdafactorConfig, AdamConfig, AdamForm, ClipConfig, FactoredAdamConfig, OptimizerConfig,
    SecondMomentEstimator, SgdConfig, SlotKind,
};
use crate::problems::{
    EmbeddingScaleProblem, EmbeddingVariant, LogisticRegression, Problem, QuadraticBowl, ScaleJumpStream,
    StreamProblem, TwoLayerNet, PROBLEM_NAMES,
};
use crate::schedule::{DecaySchedule, StepSizeKind, StepSizeSchedule, DEFAULT_DECAY_EXPONENT};

pub const REQUIRED_KEYS: [&str; 4] = ["problem.name", "optim.kind", "steps", "seed"];

/// Keys that control how long or where a run goes, excluded from the
/// configuration hash so that a checkpoint can be resumed with a different
/// step budget.
const RUN_CONTROL_KEYS: [&str; 3] = ["steps", "trace_every", "checkpoint"];

const PROBLEM_KEYS: [&str; 18] = [
    "problem.n",
    "problem.condition",
    "problem.noise",
    "problem.features",
    "problem.examples",
    "problem.batch",
    "problem.classes",
    "problem.d_in",
    "problem.d_hidden",
    "problem.d_out",
    "problem.d_model",
    "problem.variant",
    "problem.vocab",
    "problem.t_jump",
    "problem.low",
    "problem.high",
    "problem.rows",
    "problem.cols",
];

const OPTIM_KEYS: [&str; 14] = [
    "optim.beta1",
    "optim.eps",
    "optim.eps1",
    "optim.eps2",
    "optim.clip",
    "optim.factored",
    "schedule.kind",
    "schedule.scale",
    "schedule.warmup_slope",
    "schedule.cap",
    "decay.kind",
    "decay.c",
    "decay.beta2",
    "optim.kind",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` does not apply to {context}")]
    NotApplicable { line: usize, key: String, context: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: `{key}` = {value} is out of range: {reason}")]
    OutOfRange {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
}

impl ConfigError {
    /// The key the error is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Syntax { .. } => None,
            Self::Duplicate { key, .. }
            | Self::UnknownKey { key, .. }
            | Self::NotApplicable { key, .. }
            | Self::Missing { key }
            | Self::InvalidValue { key, .. }
            | Self::OutOfRange { key, .. } => Some(key),
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Optimizer names accepted by `optim.kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    /// Adam written with corrected decay rates instead of bias corrections.
    AdamEquivalent,
    FactoredAdam,
    RowMean,
    ColMean,
    Adafactor,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 7] = [
        Self::Sgd,
        Self::Adam,
        Self::AdamEquivalent,
        Self::FactoredAdam,
        Self::RowMean,
        Self::ColMean,
        Self::Adafactor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
            Self::AdamEquivalent => "adam-equivalent",
            Self::FactoredAdam => "factored-adam",
            Self::RowMean => "row-mean",
            Self::ColMean => "col-mean",
            Self::Adafactor => "adafactor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn default_schedule(self) -> StepSizeSchedule {
        match self {
            Self::Sgd => SgdConfig::default().lr,
            Self::Adam | Self::AdamEquivalent => AdamConfig::default().step,
            Self::FactoredAdam | Self::RowMean | Self::ColMean => FactoredAdamConfig::default().step,
            Self::Adafactor => AdafactorConfig::default().step,
        }
    }
}

/// A problem and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    /// Keys `problem.n` (8), `problem.condition` (10), `problem.noise` (0).
    Quad { n: usize, condition: f64, noise: f64 },
    /// Keys `problem.features` (16), `problem.examples` (256),
    /// `problem.batch` (32), `problem.classes` (2).
    Logreg {
        features: usize,
        examples: usize,
        batch: usize,
        classes: usize,
    },
    /// Keys `problem.d_in` (8), `problem.d_hidden` (16), `problem.d_out` (4),
    /// `problem.examples` (256), `problem.batch` (256), `problem.noise` (0.3).
    Mlp {
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        examples: usize,
        batch: usize,
        noise: f64,
    },
    /// Keys `problem.d_model` (64), `problem.variant` (`scaled`),
    /// `problem.vocab` (32), `problem.classes` (8).
    EmbedScale {
        d_model: usize,
        variant: EmbeddingVariant,
        vocab: usize,
        classes: usize,
    },
    /// Keys `problem.t_jump` (2000), `problem.low` (1), `problem.high` (10),
    /// `problem.rows` (8), `problem.cols` (8).
    StreamJump {
        t_jump: u64,
        low: f64,
        high: f64,
        rows: usize,
        cols: usize,
    },
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quad { .. } => "quad",
            Self::Logreg { .. } => "logreg",
            Self::Mlp { .. } => "mlp",
            Self::EmbedScale { .. } => "embed-scale",
            Self::StreamJump { .. } => "stream-jump",
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn Problem> {
        match *self {
            Self::Quad { n, condition, noise } => Box::new(QuadraticBowl::new(n, condition, noise, seed)),
            Self::Logreg {
                features,
                examples,
                batch,
                classes,
            } => Box::new(LogisticRegression::with_classes(features, examples, batch, classes, seed)),
            Self::Mlp {
                d_in,
                d_hidden,
                d_out,
                examples,
                batch,
                noise,
            } => Box::new(TwoLayerNet::with_data(d_in, d_hidden, d_out, examples, batch, noise, seed)),
            Self::EmbedScale {
                d_model,
                variant,
                vocab,
                classes,
            } => Box::new(EmbeddingScaleProblem::with_sizes(d_model, variant, vocab, classes, seed)),
            Self::StreamJump {
                t_jump,
                low,
                high,
                rows,
                cols,
            } => Box::new(StreamProblem::new(ScaleJumpStream::new(
                t_jump,
                low,
                high,
                SlotKind::Matrix { rows, cols },
            ))),
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub optimizer_kind: OptimizerKind,
    pub optimizer: OptimizerConfig,
    pub steps: u64,
    pub seed: u64,
    pub trace_every: u64,
    pub checkpoint: Option<PathBuf>,
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Canonical text: the explicit entries, sorted by key.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 over the canonical entries that identify the experiment,
    /// i.e. everything except `steps`, `trace_every` and `checkpoint`.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            if !RUN_CONTROL_KEYS.contains(&k.as_str()) {
                h.update(k.as_bytes());
                h.update(b"=");
                h.update(v.as_bytes());
                h.update(b"\n");
            }
        }
        h.finalize().into()
    }

    pub fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
        self.entries.insert("steps".into(), steps.to_string());
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.entries.insert("seed".into(), seed.to_string());
    }

    /// Second-moment decay as written in a summary table.
    pub fn decay_label(&self) -> String {
        match &self.optimizer {
            OptimizerConfig::Sgd(_) => "-".into(),
            OptimizerConfig::Adam(c) => format!("beta2={}", c.beta2),
            OptimizerConfig::FactoredAdam(c) => format!("beta2={}", c.beta2),
            OptimizerConfig::Adafactor(c) => match c.decay {
                DecaySchedule::Increasing(e) => format!("1-t^-{e}"),
                DecaySchedule::ConstantBiasCorrected(b) => format!("beta2={b}"),
            },
        }
    }

    pub fn clip_label(&self) -> String {
        match &self.optimizer {
            OptimizerConfig::Adafactor(c) => match c.clip {
                ClipConfig::Disabled => "none".into(),
                ClipConfig::Threshold(d) => format!("d={d}"),
            },
            _ => "none".into(),
        }
    }

    pub fn schedule_label(&self) -> String {
        let s = match &self.optimizer {
            OptimizerConfig::Sgd(c) => c.lr,
            OptimizerConfig::Adam(c) => c.step,
            OptimizerConfig::FactoredAdam(c) => c.step,
            OptimizerConfig::Adafactor(c) => c.step,
        };
        format!("{}*{}", s.kind.as_str(), s.scale)
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigErrors;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_config(s)
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let e = self.entries.get_mut(key)?;
        e.used = true;
        Some((e.line, e.value.clone()))
    }

    fn required(&mut self, key: &str) -> Option<(usize, String)> {
        let v = self.take(key);
        if v.is_none() {
            self.errors.push(ConfigError::Missing { key: key.into() });
        }
        v
    }

    fn parsed<T: FromStr>(&mut self, key: &str, line: usize, value: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(ConfigError::InvalidValue {
                    line,
                    key: key.into(),
                    value: value.into(),
                    reason: e.to_string(),
                });
                None
            }
        }
    }

    /// Optional value with a default and a range check.
    fn value<T>(&mut self, key: &str, default: T, ok: impl Fn(&T) -> bool, reason: &str) -> T
    where
        T: FromStr + fmt::Display + Copy,
        T::Err: fmt::Display,
    {
        let Some((line, raw)) = self.take(key) else {
            return default;
        };
        let Some(v) = self.parsed::<T>(key, line, &raw) else {
            return default;
        };
        if !ok(&v) {
            self.errors.push(ConfigError::OutOfRange {
                line,
                key: key.into(),
                value: raw,
                reason: reason.into(),
            });
            return default;
        }
        v
    }

    fn named<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, expected: &str) -> T {
        let Some((line, raw)) = self.take(key) else {
            return default;
        };
        match parse(&raw) {
            Some(v) => v,
            None => {
                self.errors.push(ConfigError::InvalidValue {
                    line,
                    key: key.into(),
                    value: raw,
                    reason: format!("expected one of {expected}"),
                });
                default
            }
        }
    }

    fn mark_used(&mut self, keys: &[&str]) {
        for k in keys {
            if let Some(e) = self.entries.get_mut(*k) {
                e.used = true;
            }
        }
    }
}

fn positive(v: &f64) -> bool {
    *v > 0.0 && v.is_finite()
}

fn nonnegative(v: &f64) -> bool {
    *v >= 0.0 && v.is_finite()
}

fn open_unit(v: &f64) -> bool {
    *v > 0.0 && *v < 1.0
}

fn half_open_unit(v: &f64) -> bool {
    (0.0..1.0).contains(v)
}

/// Parses and validates a configuration, reporting every error found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut entries = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            errors.push(ConfigError::Syntax {
                line,
                text: trimmed.into(),
            });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            errors.push(ConfigError::Syntax {
                line,
                text: trimmed.into(),
            });
            continue;
        }
        if entries.contains_key(&key) {
            errors.push(ConfigError::Duplicate { line, key });
            continue;
        }
        entries.insert(
            key,
            Entry {
                line,
                value,
                used: false,
            },
        );
    }
    let mut r = Reader { entries, errors };

    let problem = read_problem(&mut r);
    let optimizer = read_optimizer(&mut r);
    let steps = r
        .required("steps")
        .and_then(|(line, v)| checked_count(&mut r, "steps", line, &v));
    let seed = r.required("seed").and_then(|(line, v)| r.parsed::<u64>("seed", line, &v));
    let trace_every = r.value::<u64>("trace_every", 1, |v| *v >= 1, "must be at least 1");
    let checkpoint = r.take("checkpoint").map(|(_, v)| PathBuf::from(v));

    let leftovers: Vec<(String, usize)> = r
        .entries
        .iter()
        .filter(|(_, e)| !e.used)
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (key, line) in leftovers {
        let known = PROBLEM_KEYS.contains(&key.as_str()) || OPTIM_KEYS.contains(&key.as_str());
        let err = if !known {
            ConfigError::UnknownKey { line, key }
        } else if key.starts_with("problem.") {
            let context = format!("problem `{}`", problem.as_ref().map_or("?", |p| p.name()));
            ConfigError::NotApplicable { line, key, context }
        } else {
            let context = format!("optimizer `{}`", optimizer.as_ref().map_or("?", |o| o.0.as_str()));
            ConfigError::NotApplicable { line, key, context }
        };
        r.errors.push(err);
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| match e {
            ConfigError::Missing { .. } => usize::MAX,
            ConfigError::Syntax { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::NotApplicable { line, .. }
            | ConfigError::InvalidValue { line, .. }
            | ConfigError::OutOfRange { line, .. } => *line,
        });
        return Err(ConfigErrors(r.errors));
    }
    let (optimizer_kind, optimizer) = optimizer.expect("no errors implies an optimizer");
    Ok(ExperimentConfig {
        problem: problem.expect("no errors implies a problem"),
        optimizer_kind,
        optimizer,
        steps: steps.expect("no errors implies steps"),
        seed: seed.expect("no errors implies a seed"),
        trace_every,
        checkpoint,
        entries: r.entries.into_iter().map(|(k, e)| (k, e.value)).collect(),
    })
}

fn checked_count(r: &mut Reader, key: &str, line: usize, raw: &str) -> Option<u64> {
    let v = r.parsed::<u64>(key, line, raw)?;
    if v == 0 {
        r.errors.push(ConfigError::OutOfRange {
            line,
            key: key.into(),
            value: raw.into(),
            reason: "must be at least 1".into(),
        });
        return None;
    }
    Some(v)
}

fn read_problem(r: &mut Reader) -> Option<ProblemConfig> {
    let (line, name) = r.required("problem.name")?;
    if !PROBLEM_NAMES.contains(&name.as_str()) {
        r.errors.push(ConfigError::InvalidValue {
            line,
            key: "problem.name".into(),
            value: name,
            reason: format!("expected one of {}", PROBLEM_NAMES.join(", ")),
        });
        r.mark_used(&PROBLEM_KEYS);
        return None;
    }
    let at_least = |n: usize| move |v: &usize| *v >= n;
    let problem = match name.as_str() {
        "quad" => ProblemConfig::Quad {
            n: r.value("problem.n", 8, at_least(1), "must be at least 1"),
            condition: r.value("problem.condition", 10.0, |v: &f64| *v >= 1.0 && v.is_finite(), "must be at least 1"),
            noise: r.value("problem.noise", 0.0, nonnegative, "must be nonnegative"),
        },
        "logreg" => {
            let features = r.value("problem.features", 16, at_least(1), "must be at least 1");
            let examples = r.value("problem.examples", 256, at_least(1), "must be at least 1");
            let batch = r.value("problem.batch", 32.min(examples), at_least(1), "must be at least 1");
            let classes = r.value("problem.classes", 2, at_least(2), "must be at least 2");
            check_batch(r, batch, examples);
            ProblemConfig::Logreg {
                features,
                examples,
                batch,
                classes,
            }
        }
        "mlp" => {
            let d_in = r.value("problem.d_in", 8, at_least(2), "must be at least 2");
            let d_hidden = r.value("problem.d_hidden", 16, at_least(2), "must be at least 2");
            let d_out = r.value("problem.d_out", 4, at_least(2), "must be at least 2");
            let examples = r.value("problem.examples", 256, at_least(1), "must be at least 1");
            let batch = r.value("problem.batch", examples, at_least(1), "must be at least 1");
            let noise = r.value("problem.noise", 0.3, nonnegative, "must be nonnegative");
            check_batch(r, batch, examples);
            ProblemConfig::Mlp {
                d_in,
                d_hidden,
                d_out,
                examples,
                batch,
                noise,
            }
        }
        "embed-scale" => ProblemConfig::EmbedScale {
            d_model: r.value("problem.d_model", 64, at_least(4), "must be at least 4"),
            variant: r.named(
                "problem.variant",
                EmbeddingVariant::Scaled,
                EmbeddingVariant::parse,
                "scaled, unit-init, small-init",
            ),
            vocab: r.value("problem.vocab", 32, at_least(1), "must be at least 1"),
            classes: r.value("problem.classes", 8, at_least(2), "must be at least 2"),
        },
        _ => ProblemConfig::StreamJump {
            t_jump: r.value("problem.t_jump", 2000, |v: &u64| *v >= 1, "must be at least 1"),
            low: r.value("problem.low", 1.0, positive, "must be positive"),
            high: r.value("problem.high", 10.0, positive, "must be positive"),
            rows: r.value("problem.rows", 8, at_least(1), "must be at least 1"),
            cols: r.value("problem.cols", 8, at_least(1), "must be at least 1"),
        },
    };
    Some(problem)
}

fn check_batch(r: &mut Reader, batch: usize, examples: usize) {
    if batch > examples {
        let line = r.entries.get("problem.batch").map_or(0, |e| e.line);
        r.errors.push(ConfigError::OutOfRange {
            line,
            key: "problem.batch".into(),
            value: batch.to_string(),
            reason: format!("must not exceed problem.examples = {examples}"),
        });
    }
}

fn read_schedule(r: &mut Reader, default: StepSizeSchedule) -> StepSizeSchedule {
    StepSizeSchedule {
        kind: r.named(
            "schedule.kind",
            default.kind,
            StepSizeKind::parse,
            "absolute-warmup, absolute-flat, relative-warmup, relative-flat, constant",
        ),
        scale: r.value("schedule.scale", default.scale, positive, "must be positive"),
        warmup_slope: r.value("schedule.warmup_slope", default.warmup_slope, positive, "must be positive"),
        cap: r.value("schedule.cap", default.cap, positive, "must be positive"),
    }
}

fn read_optimizer(r: &mut Reader) -> Option<(OptimizerKind, OptimizerConfig)> {
    let (line, name) = r.required("optim.kind")?;
    let Some(kind) = OptimizerKind::parse(&name) else {
        let names: Vec<&str> = OptimizerKind::ALL.iter().map(|k| k.as_str()).collect();
        r.errors.push(ConfigError::InvalidValue {
            line,
            key: "optim.kind".into(),
            value: name,
            reason: format!("expected one of {}", names.join(", ")),
        });
        r.mark_used(&OPTIM_KEYS);
        return None;
    };
    let step = read_schedule(r, kind.default_schedule());
    let beta2_reason = "must lie in (0, 1)";
    let config = match kind {
        OptimizerKind::Sgd => OptimizerConfig::Sgd(SgdConfig { lr: step }),
        OptimizerKind::Adam | OptimizerKind::AdamEquivalent => {
            let d = AdamConfig::default();
            OptimizerConfig::Adam(AdamConfig {
                step,
                beta1: r.value("optim.beta1", d.beta1, half_open_unit, "must lie in [0, 1)"),
                beta2: r.value("decay.beta2", d.beta2, open_unit, beta2_reason),
                eps: r.value("optim.eps", d.eps, nonnegative, "must be nonnegative"),
                form: if kind == OptimizerKind::Adam {
                    AdamForm::BiasCorrected
                } else {
                    AdamForm::DecayCorrected
                },
            })
        }
        OptimizerKind::FactoredAdam | OptimizerKind::RowMean | OptimizerKind::ColMean => {
            let d = FactoredAdamConfig::default();
            OptimizerConfig::FactoredAdam(FactoredAdamConfig {
                step,
                beta2: r.value("decay.beta2", d.beta2, open_unit, beta2_reason),
                eps: r.value("optim.eps", d.eps, nonnegative, "must be nonnegative"),
                estimator: match kind {
                    OptimizerKind::RowMean => SecondMomentEstimator::RowMean,
                    OptimizerKind::ColMean => SecondMomentEstimator::ColMean,
                    _ => SecondMomentEstimator::Factored,
                },
            })
        }
        OptimizerKind::Adafactor => {
            let d = AdafactorConfig::default();
            let clip = match r.take("optim.clip") {
                None => d.clip,
                Some((_, v)) if v == "none" => ClipConfig::Disabled,
                Some((line, v)) => match r.parsed::<f64>("optim.clip", line, &v) {
                    Some(x) if positive(&x) => ClipConfig::Threshold(x),
                    Some(_) => {
                        r.errors.push(ConfigError::OutOfRange {
                            line,
                            key: "optim.clip".into(),
                            value: v,
                            reason: "must be positive or `none`".into(),
                        });
                        d.clip
                    }
                    None => d.clip,
                },
            };
            // A lone `decay.beta2` selects the constant schedule.
            let implied = if r.entries.contains_key("decay.beta2") { "constant" } else { "increasing" };
            let decay_kind = r.named(
                "decay.kind",
                implied,
                |s| ["increasing", "constant"].into_iter().find(|k| *k == s),
                "increasing, constant",
            );
            let decay = if decay_kind == "increasing" {
                DecaySchedule::Increasing(r.value("decay.c", DEFAULT_DECAY_EXPONENT, positive, "must be positive"))
            } else {
                DecaySchedule::ConstantBiasCorrected(r.value("decay.beta2", 0.999, open_unit, beta2_reason))
            };
            OptimizerConfig::Adafactor(AdafactorConfig {
                eps1: r.value("optim.eps1", d.eps1, nonnegative, "must be nonnegative"),
                eps2: r.value("optim.eps2", d.eps2, positive, "must be positive"),
                clip,
                step,
                decay,
                beta1: r.value("optim.beta1", d.beta1, half_open_unit, "must lie in [0, 1)"),
                factored: r.value("optim.factored", d.factored, |_| true, ""),
            })
        }
    };
    Some((kind, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{DEFAULT_EPS1, DEFAULT_EPS2};

    const MINIMAL: &str = "problem.name = quad\noptim.kind = adafactor\nsteps = 500\nseed = 1\n";

    #[test]
    fn adafactor_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let OptimizerConfig::Adafactor(c) = cfg.optimizer else {
            panic!("expected adafactor")
        };
        assert_eq!(c.eps1, DEFAULT_EPS1);
        assert_eq!(c.eps1, 1e-30);
        assert_eq!(c.eps2, DEFAULT_EPS2);
        assert_eq!(c.eps2, 1e-3);
        assert_eq!(c.clip, ClipConfig::Threshold(1.0));
        assert_eq!(c.decay, DecaySchedule::Increasing(0.8));
        assert_eq!(c.step.kind, StepSizeKind::RelativeFlat);
        assert_eq!(c.step.value(1), 1e-2);
        assert_eq!(c.step.value(40_000), 1.0 / 200.0);
        assert_eq!(c.beta1, 0.0);
        assert_eq!(cfg.trace_every, 1);
        assert_eq!(cfg.checkpoint, None);
    }

    #[test]
    fn beta2_out_of_range_names_key() {
        for text in [
            format!("{MINIMAL}decay.beta2 = 1.5\n"),
            format!("{MINIMAL}decay.kind = constant\ndecay.beta2 = 1.5\n"),
            MINIMAL.replace("adafactor", "adam") + "decay.beta2 = 1.5\n",
        ] {
            let errs = parse_config(&text).unwrap_err();
            assert_eq!(errs.0.len(), 1, "{errs}");
            assert_eq!(errs.0[0].key(), Some("decay.beta2"));
            assert!(matches!(errs.0[0], ConfigError::OutOfRange { .. }));
            assert!(errs.to_string().contains("decay.beta2"));
        }
        let errs = parse_config(&format!("{MINIMAL}decay.kind = increasing\ndecay.beta2 = 0.9\n")).unwrap_err();
        assert!(matches!(&errs.0[0], ConfigError::NotApplicable { key, .. } if key == "decay.beta2"));
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let errs = parse_config("").unwrap_err();
        let keys: Vec<&str> = errs.0.iter().filter_map(|e| e.key()).collect();
        assert_eq!(keys, REQUIRED_KEYS.to_vec());
        assert!(errs.0.iter().all(|e| matches!(e, ConfigError::Missing { .. })));
    }

    #[test]
    fn collects_all_errors() {
        let text = "problem.name = quad\noptim.kind = adam\nsteps = 0\nseed = x\nbogus = 1\noptim.eps1 = 1\nno equals\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.0.len(), 5, "{errs}");
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::UnknownKey { key, .. } if key == "bogus")));
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::NotApplicable { key, .. } if key == "optim.eps1")));
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::Syntax { line: 7, .. })));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let errs = parse_config(&format!("{MINIMAL}seed = 2\n")).unwrap_err();
        assert!(matches!(errs.0[0], ConfigError::Duplicate { line: 5, .. }));
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# quad run\n\n  problem.name=quad  \noptim.kind =sgd\nsteps= 3\nseed = 9\nschedule.scale = 2\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.optimizer, OptimizerConfig::Sgd(SgdConfig { lr: StepSizeSchedule::absolute_flat(2.0) }));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn every_kind_parses() {
        for kind in OptimizerKind::ALL {
            let text = format!("problem.name = mlp\noptim.kind = {}\nsteps = 1\nseed = 1\n", kind.as_str());
            let cfg = parse_config(&text).unwrap();
            assert_eq!(cfg.optimizer_kind, kind);
            cfg.optimizer.validate().unwrap();
        }
    }

    #[test]
    fn every_problem_parses_and_builds() {
        for name in PROBLEM_NAMES {
            let text = format!("problem.name = {name}\noptim.kind = sgd\nsteps = 1\nseed = 1\n");
            let cfg = parse_config(&text).unwrap();
            assert_eq!(cfg.problem.name(), name);
            assert_eq!(cfg.problem.build(cfg.seed).name(), name);
        }
    }

    #[test]
    fn problem_keys_checked_against_problem() {
        let text = "problem.name = quad\nproblem.d_model = 8\noptim.kind = sgd\nsteps = 1\nseed = 1\n";
        let errs = parse_config(text).unwrap_err();
        assert!(matches!(&errs.0[0], ConfigError::NotApplicable { key, .. } if key == "problem.d_model"));
    }

    #[test]
    fn batch_larger_than_examples() {
        let text = "problem.name = logreg\nproblem.examples = 10\nproblem.batch = 20\noptim.kind = sgd\nsteps = 1\nseed = 1\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.0[0].key(), Some("problem.batch"));
    }

    #[test]
    fn hash_ignores_run_control_keys() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = parse_config(&MINIMAL.replace("500", "50")).unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set_seed(2);
        assert_ne!(a.hash(), b.hash());
        let c = parse_config(&format!("{MINIMAL}optim.clip = none\n")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn canonical_text_round_trips() {
        let a = parse_config(&format!("{MINIMAL}optim.clip = none\ndecay.c = 0.5\n")).unwrap();
        let b = parse_config(&a.to_text()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn clip_values() {
        let cfg = parse_config(&format!("{MINIMAL}optim.clip = 2\n")).unwrap();
        assert_eq!(cfg.clip_label(), "d=2");
        let errs = parse_config(&format!("{MINIMAL}optim.clip = -1\n")).unwrap_err();
        assert_eq!(errs.0[0].key(), Some("optim.clip"));
    }
}
