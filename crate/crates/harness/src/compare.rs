//! Multi-seed strategy comparisons run on a worker pool.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::RunMetrics;
use crate::runner;
use crate::stats::{mann_whitney, median, quantile, Alternative, RankSumTest};

pub const MIN_SEEDS: usize = 5;

/// Scalar extracted from one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Steps from the first change to the `k`-th interaction; censored if never reached.
    StepsToInteraction(usize),
    /// Held-out loss on `phase` at `step`.
    HeldoutLoss { step: u64, phase: u8 },
    /// Cumulative interactions at the end of the run.
    Interactions,
    /// Mean extrinsic return over all intervals with completed episodes.
    MeanReturn,
}

impl Metric {
    pub fn extract(&self, metrics: &RunMetrics) -> Option<f64> {
        match *self {
            Metric::StepsToInteraction(k) => metrics.steps_to_kth_interaction(k).map(|s| s as f64),
            Metric::HeldoutLoss { step, phase } => metrics.heldout_loss_at(step, phase),
            Metric::Interactions => Some(metrics.summary.interactions as f64),
            Metric::MeanReturn => {
                let (mut total, mut episodes) = (0.0, 0usize);
                for r in &metrics.records {
                    if let Some(m) = r.mean_return {
                        total += m * r.episodes_completed as f64;
                        episodes += r.episodes_completed;
                    }
                }
                (episodes > 0).then(|| total / episodes as f64)
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::StepsToInteraction(k) => write!(f, "steps_to_interaction:{k}"),
            Metric::HeldoutLoss { step, phase } => write!(f, "heldout_loss:{step}:{phase}"),
            Metric::Interactions => f.write_str("interactions"),
            Metric::MeanReturn => f.write_str("mean_return"),
        }
    }
}

impl FromStr for Metric {
    type Err = HarnessError;

    /// `steps_to_interaction:K`, `heldout_loss:STEP:PHASE`, `interactions`, `mean_return`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::config("metric", format!("unrecognised metric `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["steps_to_interaction", k] => {
                let k: usize = k.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(HarnessError::config("metric", "interaction index k must be at least 1"));
                }
                Ok(Metric::StepsToInteraction(k))
            }
            ["heldout_loss", step, phase] => Ok(Metric::HeldoutLoss {
                step: step.parse().map_err(|_| bad())?,
                phase: phase.parse().map_err(|_| bad())?,
            }),
            ["interactions"] => Ok(Metric::Interactions),
            ["mean_return"] => Ok(Metric::MeanReturn),
            _ => Err(bad()),
        }
    }
}

/// A labelled run template; the seed is filled in per run.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub config: RunConfig,
}

impl Arm {
    pub fn new(label: impl Into<String>, config: RunConfig) -> Self {
        Self { label: label.into(), config }
    }

    /// Label by strategy name.
    pub fn for_strategy(config: RunConfig) -> Self {
        Self::new(config.strategy().name(), config)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Worker count: `CR_THREADS` if set, capped by the available parallelism.
pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("CR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n >= 1 => n.min(available),
        _ => available,
    }
}

/// Metrics file for one run inside an output directory.
pub fn run_path(dir: &Path, label: &str, seed: u64) -> PathBuf {
    dir.join(label).join(format!("seed-{seed}.jsonl"))
}

/// Run every arm for every seed, in parallel. Results are ordered by
/// (arm, seed). With `out_dir`, each run streams to `<out_dir>/<label>/seed-<seed>.jsonl`.
pub fn run_grid(arms: &[Arm], seeds: &[u64], out_dir: Option<&Path>) -> Result<Vec<RunOutcome>> {
    let jobs: Vec<(usize, u64)> = (0..arms.len()).flat_map(|a| seeds.iter().map(move |&s| (a, s))).collect();
    for arm in arms {
        arm.config.clone().with_seed(seeds.first().copied().unwrap_or(0)).validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::config("CR_THREADS", e.to_string()))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, seed)| {
                let arm = &arms[a];
                let mut config = arm.config.clone().with_seed(seed);
                config.output = out_dir.map(|d| run_path(d, &arm.label, seed));
                let metrics = runner::run(&config)?;
                Ok(RunOutcome { label: arm.label.clone(), seed, metrics })
            })
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub n: usize,
    pub censored: usize,
    /// `None` when the statistic falls on censored runs.
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub all_censored: bool,
    /// Metric value per seed, in seed order.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairwise {
    pub a: String,
    pub b: String,
    pub test: RankSumTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: Metric,
    pub seeds: Vec<u64>,
    pub arms: Vec<ArmSummary>,
    /// Two-sided tests for every pair of arms.
    pub pairwise: Vec<Pairwise>,
}

impl ComparisonReport {
    pub fn arm(&self, label: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.label == label)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&Pairwise> {
        self.pairwise.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn to_markdown(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("censored".to_owned(), |x| format!("{x:.6}"));
        let mut s = format!("metric: `{}`, seeds: {:?}\n\n", self.metric, self.seeds);
        s.push_str("| arm | n | censored | median | q1 | q3 |\n|---|---|---|---|---|---|\n");
        for a in &self.arms {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                a.label,
                a.n,
                a.censored,
                fmt(a.median),
                fmt(a.q1),
                fmt(a.q3)
            ));
        }
        s.push_str("\n| a | b | U | p (two-sided) |\n|---|---|---|---|\n");
        for p in &self.pairwise {
            s.push_str(&format!("| {} | {} | {} | {:.6} |\n", p.a, p.b, p.test.u, p.test.p_value));
        }
        s
    }
}

/// Summaries and pairwise tests from finished runs, ordered as `labels`.
pub fn summarize(metric: Metric, labels: &[String], seeds: &[u64], outcomes: &[RunOutcome]) -> ComparisonReport {
    let arms: Vec<ArmSummary> = labels
        .iter()
        .map(|label| {
            let values: Vec<Option<f64>> = seeds
                .iter()
                .map(|&seed| {
                    outcomes
                        .iter()
                        .find(|o| &o.label == label && o.seed == seed)
                        .and_then(|o| metric.extract(&o.metrics))
                })
                .collect();
            let censored = values.iter().filter(|v| v.is_none()).count();
            ArmSummary {
                label: label.clone(),
                n: values.len(),
                censored,
                median: median(&values),
                q1: quantile(&values, 0.25),
                q3: quantile(&values, 0.75),
                all_censored: censored == values.len(),
                values,
            }
        })
        .collect();
    let mut pairwise = Vec::new();
    for i in 0..arms.len() {
        for j in i + 1..arms.len() {
            if arms[i].values.is_empty() || arms[j].values.is_empty() {
                continue;
            }
            pairwise.push(Pairwise {
                a: arms[i].label.clone(),
                b: arms[j].label.clone(),
                test: mann_whitney(&arms[i].values, &arms[j].values, Alternative::TwoSided),
            });
        }
    }
    ComparisonReport { metric, seeds: seeds.to_vec(), arms, pairwise }
}

/// Run all arms over the shared seed list and compare them on `metric`.
pub fn compare(arms: &[Arm], seeds: &[u64], metric: Metric, out_dir: Option<&Path>) -> Result<(ComparisonReport, Vec<RunOutcome>)> {
    if arms.len() < 2 {
        return Err(HarnessError::config("configs", "a comparison needs at least two arms"));
    }
    if seeds.len() < MIN_SEEDS {
        return Err(HarnessError::config("seeds", format!("a comparison needs at least {MIN_SEEDS} seeds")));
    }
    let mut labels: Vec<String> = Vec::new();
    for arm in arms {
        if labels.contains(&arm.label) {
            return Err(HarnessError::config("configs", format!("duplicate arm label `{}`", arm.label)));
        }
        labels.push(arm.label.clone());
    }
    let outcomes = run_grid(arms, seeds, out_dir)?;
    let report = summarize(metric, &labels, seeds, &outcomes);
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok((report, outcomes))
}

pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let json = dir.join("comparison.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json, text + "\n").map_err(|e| HarnessError::io(&json, e))?;
    let md = dir.join("comparison.md");
    std::fs::write(&md, report.to_markdown()).map_err(|e| HarnessError::io(&md, e))
}
