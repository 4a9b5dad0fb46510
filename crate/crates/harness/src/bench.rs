//! Sum-tree microbenchmark: interleaved `set` + `sample` at several capacities.

use std::hint::black_box;
use std::time::Instant;

use curious_replay::sumtree::SumTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub exponent: u32,
    pub capacity: usize,
    pub ops: usize,
    /// False when the tree had no mass and only `set` was timed.
    pub sampled: bool,
    pub ns_per_op: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub entries: Vec<BenchEntry>,
    /// `(exponent, per-op time relative to the smallest capacity)`.
    pub ratios: Vec<(u32, f64)>,
}

impl BenchReport {
    pub fn entry(&self, exponent: u32) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.exponent == exponent)
    }

    /// Per-op time at `big` divided by per-op time at `small`.
    pub fn ratio(&self, big: u32, small: u32) -> Option<f64> {
        Some(self.entry(big)?.ns_per_op / self.entry(small)?.ns_per_op)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| capacity | ops | sampled | ns/op | ratio |\n|---|---|---|---|---|\n");
        for (e, (_, r)) in self.entries.iter().zip(&self.ratios) {
            s.push_str(&format!("| 2^{} | {} | {} | {:.1} | {:.2} |\n", e.exponent, e.ops, e.sampled, e.ns_per_op, r));
        }
        s
    }
}

/// The operation stream for one capacity: leaf indices, priorities and uniforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub initial: Vec<f64>,
    pub indices: Vec<usize>,
    pub priorities: Vec<f64>,
    pub uniforms: Vec<f64>,
}

impl Workload {
    /// With `zero_filled`, every priority is zero.
    pub fn generate(capacity: usize, ops: usize, seed: u64, zero_filled: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ capacity as u64);
        let priority = |rng: &mut ChaCha8Rng| if zero_filled { 0.0 } else { rng.gen_range(0.0..100.0) };
        let initial = (0..capacity).map(|_| priority(&mut rng)).collect();
        let indices = (0..ops).map(|_| rng.gen_range(0..capacity)).collect();
        let priorities = (0..ops).map(|_| priority(&mut rng)).collect();
        let uniforms = (0..ops).map(|_| rng.gen::<f64>()).collect();
        Self { initial, indices, priorities, uniforms }
    }
}

fn bench_one(exponent: u32, ops: usize, seed: u64, zero_filled: bool) -> Result<BenchEntry> {
    let capacity = 1usize << exponent;
    let work = Workload::generate(capacity, ops, seed, zero_filled);
    let mut tree = SumTree::<f64>::new(capacity)?;
    for (i, &p) in work.initial.iter().enumerate() {
        tree.set(i, p)?;
    }
    let sampled = tree.sample(0.5).is_ok();
    let start = Instant::now();
    if sampled {
        for k in 0..ops {
            tree.set(work.indices[k], work.priorities[k])?;
            black_box(tree.sample(work.uniforms[k])?);
        }
    } else {
        for k in 0..ops {
            tree.set(work.indices[k], work.priorities[k])?;
        }
    }
    let elapsed = start.elapsed().as_nanos() as f64;
    Ok(BenchEntry { exponent, capacity, ops, sampled, ns_per_op: elapsed / ops as f64 })
}

pub fn bench_sumtree(exponents: &[u32], ops: usize, seed: u64) -> Result<BenchReport> {
    bench_with(exponents, ops, seed, false)
}

/// Benchmark on a zero-filled tree: sampling is refused, so only `set` is timed.
pub fn bench_sumtree_zero_filled(exponents: &[u32], ops: usize, seed: u64) -> Result<BenchReport> {
    bench_with(exponents, ops, seed, true)
}

fn bench_with(exponents: &[u32], ops: usize, seed: u64, zero_filled: bool) -> Result<BenchReport> {
    if ops == 0 {
        return Err(HarnessError::config("ops", "must be at least 1"));
    }
    if exponents.is_empty() || exponents.iter().any(|&e| e > 30) {
        return Err(HarnessError::config("exponents", "need one or more exponents no larger than 30"));
    }
    let entries = exponents
        .iter()
        .map(|&e| bench_one(e, ops, seed, zero_filled))
        .collect::<Result<Vec<_>>>()?;
    let base = entries[0].ns_per_op;
    let ratios = entries.iter().map(|e| (e.exponent, e.ns_per_op / base)).collect();
    Ok(BenchReport { seed, entries, ratios })
}
