//! Dyna-style agent running the prioritized replay training cycle.
//!
//! Each cycle collects `steps_per_train` environment steps into the buffer,
//! samples one prioritized batch, trains the world model and the disagreement
//! ensemble on it, runs Q-learning on the real batch plus one-step rollouts
//! imagined by the model, and finally writes new priorities for the batch.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{invalid, Result};
use crate::replay::{PrioritizedBuffer, SlotId, Strategy, Transition};
use crate::worldmodel::{DisagreementEnsemble, DynamicsModel, InputEncoding};

/// Quantized observation used as a Q-table key.
pub type ObsKey = Box<[i8]>;

/// Round every feature to the nearest integer in `i8` range. Exact for the
/// one-hot observations the gridworlds emit.
pub fn observation_key(observation: &[f64]) -> ObsKey {
    observation.iter().map(|&x| x.round().clamp(-128.0, 127.0) as i8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrinsicMode {
    None,
    #[default]
    Disagreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Environment steps collected per training step.
    pub steps_per_train: usize,
    pub batch_size: usize,
    /// One-step model rollouts per training step, seeded at batch states.
    pub imagination_rollouts_per_train: usize,
    pub intrinsic_mode: IntrinsicMode,
    pub intrinsic_scale: f64,
    pub epsilon_greedy: f64,
    pub value_learning_rate: f64,
    pub model_learning_rate: f64,
    pub ensemble_size: usize,
    pub model_encoding: InputEncoding,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            steps_per_train: 5,
            batch_size: 16,
            imagination_rollouts_per_train: 8,
            intrinsic_mode: IntrinsicMode::Disagreement,
            intrinsic_scale: 100.0,
            epsilon_greedy: 0.1,
            value_learning_rate: 0.25,
            model_learning_rate: 0.5,
            ensemble_size: 5,
            model_encoding: InputEncoding::ActionConditioned,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_train == 0 {
            return Err(invalid("steps_per_train must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_greedy) {
            return Err(invalid("epsilon_greedy must lie in [0, 1]"));
        }
        if !(self.intrinsic_scale >= 0.0 && self.intrinsic_scale.is_finite()) {
            return Err(invalid("intrinsic_scale must be non-negative"));
        }
        if !(self.value_learning_rate > 0.0 && self.value_learning_rate <= 1.0) {
            return Err(invalid("value_learning_rate must lie in (0, 1]"));
        }
        if !(self.model_learning_rate > 0.0 && self.model_learning_rate.is_finite()) {
            return Err(invalid("model_learning_rate must be positive"));
        }
        if self.ensemble_size == 0 {
            return Err(invalid("ensemble_size must be at least 1"));
        }
        Ok(())
    }
}

/// Tabular action values keyed by quantized observation.
#[derive(Debug, Clone)]
pub struct ValueTable {
    q_values: HashMap<ObsKey, Vec<f64>>,
    action_count: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_greedy: f64,
    zeros: Vec<f64>,
}

impl ValueTable {
    pub fn new(action_count: usize, learning_rate: f64, gamma: f64, epsilon_greedy: f64) -> Self {
        Self {
            q_values: HashMap::new(),
            action_count,
            learning_rate,
            gamma,
            epsilon_greedy,
            zeros: vec![0.0; action_count],
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Number of keys with stored values.
    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }

    pub fn q(&self, key: &[i8]) -> &[f64] {
        self.q_values.get(key).map_or(&self.zeros, Vec::as_slice)
    }

    pub fn set_q(&mut self, key: ObsKey, action: usize, value: f64) {
        let n = self.action_count;
        self.q_values.entry(key).or_insert_with(|| vec![0.0; n])[action] = value;
    }

    /// `max_a Q(key, a)`; zero for unseen keys.
    pub fn value(&self, key: &[i8]) -> f64 {
        self.q(key).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, lowest id on ties.
    pub fn greedy(&self, key: &[i8]) -> usize {
        let q = self.q(key);
        let mut best = 0;
        for (a, &v) in q.iter().enumerate().skip(1) {
            if v > q[best] {
                best = a;
            }
        }
        best
    }

    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> usize {
        if rng.gen::<f64>() < self.epsilon_greedy {
            rng.gen_range(0..self.action_count)
        } else {
            self.greedy(&observation_key(observation))
        }
    }

    /// `r + gamma * V(next) * (1 - terminal) - V(current)`.
    pub fn td_error(&self, key: &[i8], reward: f64, next_key: &[i8], terminal: bool) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.gamma * self.value(next_key) };
        reward + bootstrap - self.value(key)
    }

    /// One Q-learning update towards `reward + gamma * V(next)`.
    pub fn update(&mut self, key: &[i8], action: usize, reward: f64, next_key: &[i8], terminal: bool) {
        let bootstrap = if terminal { 0.0 } else { self.gamma * self.value(next_key) };
        let target = reward + bootstrap;
        let lr = self.learning_rate;
        let n = self.action_count;
        let q = self.q_values.entry(key.into()).or_insert_with(|| vec![0.0; n]);
        q[action] += lr * (target - q[action]);
    }
}

/// Summary of one training step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub batch: Vec<SlotId>,
    /// World-model losses before the update, in batch order.
    pub model_losses: Vec<f64>,
    /// TD errors under the pre-update values, in batch order.
    pub td_errors: Vec<f64>,
    pub mean_training_reward: f64,
    pub skipped_updates: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleReport {
    pub steps: usize,
    pub extrinsic_reward: f64,
    pub interactions: u64,
    pub episodes_ended: usize,
    /// Extrinsic returns of the episodes that ended during collection.
    pub episode_returns: Vec<f64>,
    pub train: Option<TrainReport>,
}

/// Agent state: values, world model, ensemble and the current observation.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub values: ValueTable,
    pub model: DynamicsModel<f64>,
    pub ensemble: DisagreementEnsemble<f64>,
    observation: Option<Arc<[f64]>>,
    episode_return: f64,
}

impl Agent {
    /// `gamma` is shared by Q-learning and TD prioritization.
    pub fn new(config: AgentConfig, obs_dim: usize, action_count: usize, gamma: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let lr = config.model_learning_rate;
        let model = DynamicsModel::new(obs_dim, action_count, config.model_encoding, lr, seed)?;
        let ensemble =
            DisagreementEnsemble::new(config.ensemble_size, obs_dim, action_count, config.model_encoding, lr, seed)?;
        Ok(Self {
            values: ValueTable::new(action_count, config.value_learning_rate, gamma, config.epsilon_greedy),
            config,
            model,
            ensemble,
            observation: None,
            episode_return: 0.0,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> usize {
        self.values.act(observation, rng)
    }

    /// `intrinsic_scale * disagreement`, or zero when intrinsic reward is off.
    pub fn intrinsic_reward(&self, observation: &[f64], action: usize) -> Result<f64> {
        match self.config.intrinsic_mode {
            IntrinsicMode::None => Ok(0.0),
            IntrinsicMode::Disagreement => {
                if self.config.intrinsic_scale == 0.0 {
                    return Ok(0.0);
                }
                Ok(self.config.intrinsic_scale * self.ensemble.disagreement(observation, action)?)
            }
        }
    }

    /// Reward the value function is trained on.
    fn training_reward(&self, observation: &[f64], action: usize, extrinsic: f64) -> Result<f64> {
        Ok(extrinsic + self.intrinsic_reward(observation, action)?)
    }

    /// Take `steps` environment steps with the current policy, adding each
    /// transition to the buffer.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        env: &mut dyn Environment,
        buffer: &mut PrioritizedBuffer<f64>,
        steps: usize,
        rng: &mut R,
    ) -> Result<CycleReport> {
        let mut report = CycleReport::default();
        let mut obs = match self.observation.take() {
            Some(o) => o,
            None => env.observation().into(),
        };
        for _ in 0..steps {
            let action = self.act(&obs, rng);
            let env_step = env.global_step();
            let result = env.step(action)?;
            let next: Arc<[f64]> = result.observation.into();
            let transition = Transition::new(obs, action, result.reward, next.clone(), result.terminal)
                .with_step(env_step, Some(result.info.phase_tag));
            buffer.add(transition)?;
            report.steps += 1;
            report.extrinsic_reward += result.reward;
            report.interactions += u64::from(result.info.interacted);
            self.episode_return += result.reward;
            obs = if result.terminal || result.truncated {
                report.episodes_ended += 1;
                report.episode_returns.push(std::mem::take(&mut self.episode_return));
                env.begin_episode().into()
            } else {
                next
            };
        }
        self.observation = Some(obs);
        Ok(report)
    }

    /// Forget the cached current observation, e.g. after an environment reset.
    pub fn reset_observation(&mut self) {
        self.observation = None;
        self.episode_return = 0.0;
    }

    /// Sample a batch, train model, ensemble and values on it, and update priorities.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &mut PrioritizedBuffer<f64>,
        rng: &mut R,
    ) -> Result<TrainReport> {
        let batch = buffer.sample_batch(self.config.batch_size, rng)?;
        let (ids, transitions): (Vec<SlotId>, Vec<Transition<f64>>) = batch.into_iter().unzip();

        let keys: Vec<(ObsKey, ObsKey)> = transitions
            .iter()
            .map(|t| (observation_key(&t.observation), observation_key(&t.next_observation)))
            .collect();
        let rewards = transitions
            .iter()
            .map(|t| self.training_reward(&t.observation, t.action, t.reward))
            .collect::<Result<Vec<_>>>()?;
        let td_errors: Vec<f64> = transitions
            .iter()
            .zip(&keys)
            .zip(&rewards)
            .map(|((t, (k, nk)), &r)| self.values.td_error(k, r, nk, t.terminal))
            .collect();

        let model_losses = self.model.train_batch(&transitions)?;
        self.ensemble.train_batch(&transitions)?;

        for ((t, (k, nk)), &r) in transitions.iter().zip(&keys).zip(&rewards) {
            self.values.update(k, t.action, r, nk, t.terminal);
        }
        for i in 0..self.config.imagination_rollouts_per_train {
            let start = &transitions[i % transitions.len()];
            let action = rng.gen_range(0..self.values.action_count());
            let (predicted, predicted_reward) = self.model.predict(&start.observation, action)?;
            let reward = self.training_reward(&start.observation, action, predicted_reward)?;
            let key = &keys[i % transitions.len()].0;
            self.values.update(key, action, reward, &observation_key(&predicted), false);
        }

        let signals = match buffer.strategy() {
            Strategy::Td => &td_errors,
            _ => &model_losses,
        };
        let skipped_before = buffer.skipped_updates();
        buffer.update_priorities(&ids, signals)?;

        Ok(TrainReport {
            mean_training_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            skipped_updates: buffer.skipped_updates() - skipped_before,
            batch: ids,
            model_losses,
            td_errors,
        })
    }

    /// Collect `steps_per_train` transitions, then run one training step.
    pub fn train_cycle<R: Rng + ?Sized>(
        &mut self,
        env: &mut dyn Environment,
        buffer: &mut PrioritizedBuffer<f64>,
        rng: &mut R,
    ) -> Result<CycleReport> {
        let mut report = self.collect(env, buffer, self.config.steps_per_train, rng)?;
        report.train = Some(self.train_step(buffer, rng)?);
        Ok(report)
    }
}
