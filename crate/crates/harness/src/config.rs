//! Run configuration, stored as TOML.
//!
//! ```toml
//! seed = 7
//! total_steps = 60000
//! buffer_capacity = 100000   # optional
//! metrics_interval = 200     # optional, multiple of agent.steps_per_train
//! clear_buffer_at = 40000    # optional
//!
//! [env]
//! kind = "novel_object"      # or "constrained", "phase_swap"
//! size = 9
//! t0 = 20000
//!
//! [priority]                 # every key optional
//! strategy = "curious"       # uniform, td, count, adversarial, curious
//! beta = 0.7
//!
//! [agent]                    # every key optional
//! batch_size = 16
//! ```

use std::path::{Path, PathBuf};

use curious_replay::agent::AgentConfig;
use curious_replay::envs::EnvConfig;
use curious_replay::{PriorityParams, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_BUFFER_CAPACITY: usize = 100_000;
pub const DEFAULT_METRICS_INTERVAL: u64 = 200;

fn default_buffer_capacity() -> usize {
    DEFAULT_BUFFER_CAPACITY
}

fn default_metrics_interval() -> u64 {
    DEFAULT_METRICS_INTERVAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub total_steps: u64,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "default_metrics_interval")]
    pub metrics_interval: u64,
    /// Empty the buffer once this many environment steps have been taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear_buffer_at: Option<u64>,
    /// Add elapsed seconds to each metrics record. Off by default so reruns
    /// produce byte-identical files.
    #[serde(default)]
    pub record_wall_clock: bool,
    /// Metrics file; the CLI derives one from `--out` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub priority: PriorityParams,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 60_000,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            metrics_interval: DEFAULT_METRICS_INTERVAL,
            clear_buffer_at: None,
            record_wall_clock: false,
            output: None,
            env: EnvConfig::default(),
            priority: PriorityParams::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn strategy(&self) -> Strategy {
        self.priority.strategy
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.priority.strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parse without validating.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Parse { path: PathBuf::from("<string>"), message: e.to_string() })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Read, parse and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config: Self = toml::from_str(&text)
            .map_err(|e| HarnessError::Parse { path: path.to_owned(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.buffer_capacity == 0 {
            return Err(HarnessError::config("buffer_capacity", "must be at least 1"));
        }
        self.agent.validate().map_err(|e| HarnessError::config("agent", e.to_string()))?;
        self.priority.validate().map_err(|e| HarnessError::config("priority", e.to_string()))?;
        let l = self.agent.steps_per_train as u64;
        if self.metrics_interval == 0 || self.metrics_interval % l != 0 {
            return Err(HarnessError::config(
                "metrics_interval",
                format!("must be a positive multiple of agent.steps_per_train ({l})"),
            ));
        }
        if let Some(at) = self.clear_buffer_at {
            if at % l != 0 {
                return Err(HarnessError::config(
                    "clear_buffer_at",
                    format!("must be a multiple of agent.steps_per_train ({l})"),
                ));
            }
        }
        self.env.build(self.seed).map_err(|e| HarnessError::config("env", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let config = RunConfig::default();
        let text = config.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config);
        config.validate().unwrap();
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let config = RunConfig::from_toml_str("seed = 3\ntotal_steps = 100\n").unwrap();
        assert_eq!(config.buffer_capacity, 100_000);
        assert_eq!(config.metrics_interval, 200);
        assert_eq!(config.agent, AgentConfig::default());
        assert_eq!(config.strategy(), Strategy::Curious);
    }

    #[test]
    fn partial_sections() {
        let text = "seed = 1\ntotal_steps = 10\n[priority]\nstrategy = \"td\"\n[agent]\nbatch_size = 4\n\
                    [env]\nkind = \"phase_swap\"\nsize = 5\nt0 = 10\nt1 = 20\nepisode_length = 50\n";
        let config = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(config.strategy(), Strategy::Td);
        assert_eq!(config.priority.beta, 0.7);
        assert_eq!(config.agent.batch_size, 4);
        assert_eq!(config.env, EnvConfig::PhaseSwap { size: 5, t0: 10, t1: 20, episode_length: 50 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("seed = 1\ntotal_steps = 1\nbogus = 2\n").is_err());
        assert!(RunConfig::from_toml_str("seed = 1\ntotal_steps = 1\n[agent]\nbogus = 2\n").is_err());
    }

    #[test]
    fn validation_names_field() {
        let mut config = RunConfig { metrics_interval: 7, ..RunConfig::default() };
        let err = config.validate().unwrap_err();
        assert!(matches!(&err, HarnessError::Config { field, .. } if field == "metrics_interval"), "{err}");
        config.metrics_interval = 200;
        config.agent.batch_size = 0;
        assert!(matches!(config.validate().unwrap_err(), HarnessError::Config { field, .. } if field == "agent"));
        config.agent.batch_size = 16;
        config.buffer_capacity = 0;
        assert!(matches!(config.validate().unwrap_err(), HarnessError::Config { field, .. } if field == "buffer_capacity"));
        config.buffer_capacity = 10;
        config.env = EnvConfig::NovelObject { size: 2, t0: 5, t1: None };
        assert!(matches!(config.validate().unwrap_err(), HarnessError::Config { field, .. } if field == "env"));
        config.env = EnvConfig::default();
        config.clear_buffer_at = Some(12);
        assert!(matches!(config.validate().unwrap_err(), HarnessError::Config { field, .. } if field == "clear_buffer_at"));
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);
    }
}
