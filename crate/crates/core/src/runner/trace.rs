//! Trace CSV output.
//!
//! The header is fixed as [`TRACE_HEADER`]. Each traced step produces one
//! row per slot. Reals use Rust's shortest round-trip scientific notation;
//! flags are `0` or `1`.

use std::io::{self, Write};

use crate::optim::StepStats;

pub const TRACE_HEADER: &str = "t,loss,slot,rms_u,rms_x,alpha,clipped,diverged";

/// Diagnostics of one slot at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub slot: String,
    pub rms_u: f64,
    pub rms_x: f64,
    pub alpha: f64,
    pub clipped: bool,
}

impl SlotTrace {
    pub fn from_stats(slot: &str, stats: &StepStats) -> Self {
        Self {
            slot: slot.to_string(),
            rms_u: stats.rms_u,
            rms_x: stats.rms_x,
            alpha: stats.alpha,
            clipped: stats.clipped,
        }
    }
}

/// One traced step. On a diverged step no update was applied, so `rms_u`
/// and `alpha` are 0 and `rms_x` describes the unchanged parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub loss: f64,
    pub slots: Vec<SlotTrace>,
    pub diverged: bool,
}

pub struct TraceWriter<W: Write> {
    out: W,
    records: usize,
}

impl<W: Write> TraceWriter<W> {
    /// Writes the header immediately.
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(Self { out, records: 0 })
    }

    pub fn write(&mut self, record: &TraceRecord) -> io::Result<()> {
        for s in &record.slots {
            writeln!(
                self.out,
                "{},{:e},{},{:e},{:e},{:e},{},{}",
                record.t,
                record.loss,
                s.slot,
                s.rms_u,
                s.rms_x,
                s.alpha,
                u8::from(s.clipped),
                u8::from(record.diverged)
            )?;
        }
        self.records += 1;
        Ok(())
    }

    /// Number of records written so far.
    pub fn records(&self) -> usize {
        self.records
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
