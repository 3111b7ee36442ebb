//! Versioned binary checkpoints.
//!
//! All integers and reals are little-endian; reals are IEEE-754 binary64,
//! so a round trip is bit-exact. Layout:
//!
//! ```text
//! magic        4 bytes  "AFCK"
//! version      u32
//! config hash  32 bytes (SHA-256, see ExperimentConfig::hash)
//! config text  u64 length + UTF-8 bytes
//! step         u64
//! slots        u32 count, then per slot:
//!                name   u32 length + UTF-8 bytes
//!                kind   u8 (0 matrix, 1 vector, 2 scalar), u64 rows, u64 cols
//!                values f64 × rows·cols
//! state        u64 byte length + optimizer-state section (below)
//! digest       32 bytes, SHA-256 of everything above
//! ```
//!
//! The optimizer-state section holds a u32 count, then per slot a u8 state
//! tag (0 sgd, 1 adam, 2 factored, 3 mean, 4 vector), u64 `t`, a u8 array
//! count and the arrays in the order `r, c, m, v, v_hat`, each as a u8 name
//! tag (0..=4 in that order), u64 length and f64 values.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::ExperimentConfig;
use crate::optim::{AdamState, FactoredState, MeanState, ParamSlot, ParamValue, SlotKind, SlotState, VectorState};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const ARRAY_NAMES: [&str; 5] = ["r", "c", "m", "v", "v_hat"];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint was written for config {stored}, current config is {current}")]
    ConfigHashMismatch { stored: String, current: String },
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub config_text: String,
    /// Completed steps.
    pub step: u64,
    pub slots: Vec<ParamSlot>,
    pub states: Vec<SlotState>,
}

/// How to treat a config whose hash differs from the stored one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashPolicy {
    Reject,
    /// Accept and return a warning message.
    Warn,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn reals(&mut self, xs: &[f64]) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn str32(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated while reading {what}")))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.bytes(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes(8, what)?.try_into().unwrap()))
    }
    fn len(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let n = self.u64(what)?;
        usize::try_from(n).map_err(|_| CheckpointError::Corrupt(format!("{what} length {n} too large")))
    }
    fn reals(&mut self, n: usize, what: &str) -> Result<Vec<f64>, CheckpointError> {
        let size = n
            .checked_mul(8)
            .ok_or_else(|| CheckpointError::Corrupt(format!("{what} length {n} too large")))?;
        Ok(self
            .bytes(size, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn string(&mut self, n: usize, what: &str) -> Result<String, CheckpointError> {
        String::from_utf8(self.bytes(n, what)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt(format!("{what} is not UTF-8")))
    }
}

/// Serializes optimizer states in the checkpoint state-section format.
pub fn encode_states(states: &[SlotState]) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    e.u32(states.len() as u32);
    for s in states {
        e.u8(match s {
            SlotState::Sgd { .. } => 0,
            SlotState::Adam(_) => 1,
            SlotState::Factored(_) => 2,
            SlotState::Mean(_) => 3,
            SlotState::Vector(_) => 4,
        });
        e.u64(s.t());
        let arrays = s.arrays();
        e.u8(arrays.len() as u8);
        for (name, a) in arrays {
            e.u8(ARRAY_NAMES.iter().position(|n| *n == name).expect("known array name") as u8);
            e.u64(a.len() as u64);
            e.reals(a);
        }
    }
    e.0
}

/// Bytes taken by accumulator values alone, excluding all headers.
pub fn accumulator_payload_bytes(states: &[SlotState]) -> usize {
    states.iter().map(|s| 8 * s.aux_len()).sum()
}

fn decode_states(d: &mut Decoder<'_>) -> Result<Vec<SlotState>, CheckpointError> {
    let count = d.u32("state count")? as usize;
    let mut states = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let tag = d.u8("state tag")?;
        let t = d.u64("state step")?;
        let n_arrays = d.u8("array count")?;
        let mut arrays: [Option<Vec<f64>>; 5] = Default::default();
        for _ in 0..n_arrays {
            let name = d.u8("array name")? as usize;
            if name >= ARRAY_NAMES.len() || arrays[name].is_some() {
                return Err(CheckpointError::Corrupt(format!("bad array tag {name}")));
            }
            let len = d.len("array")?;
            arrays[name] = Some(d.reals(len, "array values")?);
        }
        let [r, c, m, v, v_hat] = arrays;
        let missing = |what: &str| CheckpointError::Corrupt(format!("state missing array {what}"));
        let unexpected = |present: bool| {
            if present {
                Err(CheckpointError::Corrupt(format!("unexpected array in state tag {tag}")))
            } else {
                Ok(())
            }
        };
        let state = match tag {
            0 => {
                unexpected(r.is_some() || c.is_some() || m.is_some() || v.is_some() || v_hat.is_some())?;
                SlotState::Sgd { t }
            }
            1 => {
                unexpected(r.is_some() || c.is_some() || v_hat.is_some())?;
                SlotState::Adam(AdamState {
                    m,
                    v: v.ok_or_else(|| missing("v"))?,
                    t,
                })
            }
            2 => {
                unexpected(v.is_some() || v_hat.is_some())?;
                SlotState::Factored(FactoredState {
                    r: r.ok_or_else(|| missing("r"))?,
                    c: c.ok_or_else(|| missing("c"))?,
                    m,
                    t,
                })
            }
            3 => {
                unexpected(r.is_some() || c.is_some() || m.is_some() || v_hat.is_some())?;
                SlotState::Mean(MeanState {
                    acc: v.ok_or_else(|| missing("v"))?,
                    t,
                })
            }
            4 => {
                unexpected(r.is_some() || c.is_some() || v.is_some())?;
                SlotState::Vector(VectorState {
                    v_hat: v_hat.ok_or_else(|| missing("v_hat"))?,
                    m,
                    t,
                })
            }
            other => return Err(CheckpointError::Corrupt(format!("unknown state tag {other}"))),
        };
        states.push(state);
    }
    Ok(states)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder(Vec::new());
        e.0.extend_from_slice(&CHECKPOINT_MAGIC);
        e.u32(CHECKPOINT_VERSION);
        e.0.extend_from_slice(&self.config_hash);
        e.u64(self.config_text.len() as u64);
        e.0.extend_from_slice(self.config_text.as_bytes());
        e.u64(self.step);
        e.u32(self.slots.len() as u32);
        for slot in &self.slots {
            e.str32(&slot.name);
            let (tag, rows, cols) = match slot.kind() {
                SlotKind::Matrix { rows, cols } => (0, rows, cols),
                SlotKind::Vector(n) => (1, 1, n),
                SlotKind::Scalar => (2, 1, 1),
            };
            e.u8(tag);
            e.u64(rows as u64);
            e.u64(cols as u64);
            e.reals(slot.value.as_slice());
        }
        let states = encode_states(&self.states);
        e.u64(states.len() as u64);
        e.0.extend_from_slice(&states);
        let digest = Sha256::digest(&e.0);
        e.0.extend_from_slice(&digest);
        e.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 || bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::Corrupt("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 8 + 32 {
            return Err(CheckpointError::Corrupt("truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Corrupt("digest mismatch".into()));
        }
        let mut d = Decoder { buf: body, pos: 8 };
        let config_hash: [u8; 32] = d.bytes(32, "config hash")?.try_into().unwrap();
        let text_len = d.len("config text")?;
        let config_text = d.string(text_len, "config text")?;
        let step = d.u64("step")?;
        let n_slots = d.u32("slot count")? as usize;
        let mut slots = Vec::with_capacity(n_slots.min(1024));
        for _ in 0..n_slots {
            let name_len = d.u32("slot name")? as usize;
            let name = d.string(name_len, "slot name")?;
            let tag = d.u8("slot kind")?;
            let rows = d.len("rows")?;
            let cols = d.len("cols")?;
            let kind = match (tag, rows, cols) {
                (0, r, c) if r > 0 && c > 0 => SlotKind::Matrix { rows: r, cols: c },
                (1, 1, n) if n > 0 => SlotKind::Vector(n),
                (2, 1, 1) => SlotKind::Scalar,
                _ => return Err(CheckpointError::Corrupt(format!("bad shape for slot {name}"))),
            };
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| CheckpointError::Corrupt(format!("slot {name} too large")))?;
            let values = d.reals(len, "slot values")?;
            slots.push(ParamSlot::new(name, ParamValue::from_flat(kind, values)));
        }
        let state_len = d.len("state section")?;
        let start = d.pos;
        let states = decode_states(&mut d)?;
        if d.pos - start != state_len || d.pos != body.len() {
            return Err(CheckpointError::Corrupt("section lengths disagree".into()));
        }
        Ok(Self {
            config_hash,
            config_text,
            step,
            slots,
            states,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Compares the stored hash with `config`. Under [`HashPolicy::Warn`] a
    /// mismatch yields `Ok(Some(message))`.
    pub fn check_config(&self, config: &ExperimentConfig, policy: HashPolicy) -> Result<Option<String>, CheckpointError> {
        let current = config.hash();
        if current == self.config_hash {
            return Ok(None);
        }
        let err = CheckpointError::ConfigHashMismatch {
            stored: hex(&self.config_hash),
            current: hex(&current),
        };
        match policy {
            HashPolicy::Reject => Err(err),
            HashPolicy::Warn => Ok(Some(format!("warning: {err}; proceeding"))),
        }
    }
}
