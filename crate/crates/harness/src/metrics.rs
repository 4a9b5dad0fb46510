//! JSON-lines metrics: one header line, one line per interval, one summary line.

use std::io::{BufRead, Write};
use std::path::Path;

use curious_replay::envs::steps_to_kth_interaction;
use curious_replay::replay::PriorityDiagnostics;
use curious_replay::Strategy;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub env: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub t0: u64,
    /// Phase of each entry in `IntervalRecord::heldout_loss`.
    pub heldout_phases: Vec<u8>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub step: u64,
    pub phase: u8,
    /// Cumulative interactions up to `step`.
    pub interactions: u64,
    /// Mean world-model loss on each held-out phase set.
    pub heldout_loss: Vec<f64>,
    pub episodes_completed: usize,
    /// Mean extrinsic return of episodes completed in this interval.
    pub mean_return: Option<f64>,
    /// Extrinsic reward collected in this interval.
    pub reward: f64,
    /// Mean pre-update batch loss over this interval's training steps.
    pub mean_model_loss: f64,
    pub mean_training_reward: f64,
    pub buffer_len: usize,
    pub diagnostics: PriorityDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: u64,
    pub interactions: u64,
    pub interaction_steps: Vec<u64>,
    pub episodes_completed: usize,
    pub applied_updates: u64,
    pub skipped_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Line {
    Header(Box<Header>),
    Interval(Box<IntervalRecord>),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub header: Header,
    pub records: Vec<IntervalRecord>,
    pub summary: Summary,
}

impl RunMetrics {
    /// Steps from the first change until the `k`-th interaction, if reached.
    pub fn steps_to_kth_interaction(&self, k: usize) -> Option<u64> {
        steps_to_kth_interaction(&self.summary.interaction_steps, self.header.t0, k)
    }

    pub fn record_at(&self, step: u64) -> Option<&IntervalRecord> {
        self.records.iter().find(|r| r.step == step)
    }

    /// Held-out loss on `phase` recorded at `step`.
    pub fn heldout_loss_at(&self, step: u64, phase: u8) -> Option<f64> {
        let column = self.header.heldout_phases.iter().position(|&p| p == phase)?;
        self.record_at(step).and_then(|r| r.heldout_loss.get(column).copied())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_line(&mut out, &Line::Header(Box::new(self.header.clone())))?;
        for r in &self.records {
            write_line(&mut out, &Line::Interval(Box::new(r.clone())))?;
        }
        write_line(&mut out, &Line::Summary(self.summary.clone()))
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> std::result::Result<Self, String> {
        let mut header = None;
        let mut records = Vec::new();
        let mut summary = None;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?;
            match parsed {
                Line::Header(h) if header.is_none() && n == 0 => header = Some(*h),
                Line::Interval(r) if header.is_some() && summary.is_none() => records.push(*r),
                Line::Summary(s) if header.is_some() && summary.is_none() => summary = Some(s),
                _ => return Err(format!("line {}: unexpected record", n + 1)),
            }
        }
        Ok(Self {
            header: header.ok_or("missing header")?,
            records,
            summary: summary.ok_or("missing summary")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file)).map_err(|message| {
            HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, message))
        })
    }
}

pub(crate) fn write_line<W: Write>(out: &mut W, line: &Line) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, line)?;
    out.write_all(b"\n")
}
