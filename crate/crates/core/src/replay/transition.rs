use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One environment step.
///
/// Observations are reference counted so consecutive transitions can share
/// the observation they have in common.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub observation: Arc<[S]>,
    pub action: usize,
    pub reward: S,
    pub next_observation: Arc<[S]>,
    pub terminal: bool,
    pub env_step: u64,
    /// Ground-truth environment phase. Diagnostics only.
    pub phase_tag: Option<u8>,
}

impl<S: Scalar> Transition<S> {
    pub fn new(
        observation: impl Into<Arc<[S]>>,
        action: usize,
        reward: S,
        next_observation: impl Into<Arc<[S]>>,
        terminal: bool,
    ) -> Self {
        Self {
            observation: observation.into(),
            action,
            reward,
            next_observation: next_observation.into(),
            terminal,
            env_step: 0,
            phase_tag: None,
        }
    }

    pub fn with_step(mut self, env_step: u64, phase_tag: Option<u8>) -> Self {
        self.env_step = env_step;
        self.phase_tag = phase_tag;
        self
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation.len() != self.next_observation.len() {
            return Err(Error::DimensionMismatch {
                expected: self.observation.len(),
                got: self.next_observation.len(),
            });
        }
        Ok(())
    }
}
