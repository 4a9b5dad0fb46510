//! Experiment harness: run configuration, seeded runs, metrics files,
//! strategy comparisons, sweeps, the sum-tree benchmark and reports.

pub mod bench;
pub mod compare;
pub mod config;
pub mod error;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod stats;
pub mod sweep;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use metrics::RunMetrics;
pub use runner::run;
