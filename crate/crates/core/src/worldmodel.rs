//! Linear one-step world model and a disagreement ensemble built from it.
//!
//! The model is an affine map from an input feature vector to the next
//! observation plus a scalar reward. Two input encodings are available:
//!
//! * [`InputEncoding::Concatenated`]: `observation ⊕ one_hot(action)`, so
//!   the action only shifts the output.
//! * [`InputEncoding::ActionConditioned`]: `one_hot(action) ⊗ (observation ⊕ 1)`,
//!   i.e. one affine map per action. This is what lets a linear model express
//!   "move the agent one cell in direction `a`" for one-hot positions.
//!
//! Weights are stored feature-major so that the forward pass and the
//! gradient step only touch the columns of non-zero input features.
//!
//! The reported loss weights the observation error by `1 / obs_dim`, but the
//! training step is the delta rule on every output with unit weight: the
//! mean-loss gradient preconditioned by `obs_dim / 2` on the observation head
//! and `1 / 2` on the reward head. Plain gradient descent would otherwise
//! need learning rates `obs_dim` times apart for the two heads.

use std::borrow::Borrow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::replay::Transition;
use crate::scalar::Scalar;

/// Half-width of the uniform weight initialisation.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    Concatenated,
    #[default]
    ActionConditioned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel<S> {
    obs_dim: usize,
    action_count: usize,
    encoding: InputEncoding,
    /// `feature_count * obs_dim`, column `j` at `j * obs_dim..`.
    weights: Vec<S>,
    reward_weights: Vec<S>,
    learning_rate: S,
}

/// Dense gradient of the loss with respect to the model parameters, laid out
/// like the model's own weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<S> {
    pub weights: Vec<S>,
    pub reward_weights: Vec<S>,
}

impl<S: Scalar> DynamicsModel<S> {
    pub fn zeros(obs_dim: usize, action_count: usize, encoding: InputEncoding, learning_rate: S) -> Result<Self> {
        if obs_dim == 0 || action_count == 0 {
            return Err(invalid("world model needs obs_dim >= 1 and action_count >= 1"));
        }
        if !(learning_rate > S::zero() && learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        let features = Self::feature_count_for(obs_dim, action_count, encoding);
        Ok(Self {
            obs_dim,
            action_count,
            encoding,
            weights: vec![S::zero(); features * obs_dim],
            reward_weights: vec![S::zero(); features],
            learning_rate,
        })
    }

    /// Weights drawn uniformly from `[-INIT_SCALE, INIT_SCALE]` with a ChaCha8 stream seeded by `seed`.
    pub fn new(
        obs_dim: usize,
        action_count: usize,
        encoding: InputEncoding,
        learning_rate: S,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(obs_dim, action_count, encoding, learning_rate)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in model.weights.iter_mut().chain(model.reward_weights.iter_mut()) {
            *w = S::of(rng.gen_range(-INIT_SCALE..=INIT_SCALE));
        }
        Ok(model)
    }

    fn feature_count_for(obs_dim: usize, action_count: usize, encoding: InputEncoding) -> usize {
        match encoding {
            InputEncoding::Concatenated => obs_dim + action_count,
            InputEncoding::ActionConditioned => action_count * (obs_dim + 1),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }

    pub fn learning_rate(&self) -> S {
        self.learning_rate
    }

    /// Length of the input feature vector.
    pub fn input_dim(&self) -> usize {
        Self::feature_count_for(self.obs_dim, self.action_count, self.encoding)
    }

    /// Next observation plus the reward head.
    pub fn output_dim(&self) -> usize {
        self.obs_dim + 1
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [S] {
        &mut self.weights
    }

    pub fn reward_weights(&self) -> &[S] {
        &self.reward_weights
    }

    pub fn reward_weights_mut(&mut self) -> &mut [S] {
        &mut self.reward_weights
    }

    /// Index of the input feature carrying `observation[i]` under `action`.
    pub fn observation_feature(&self, action: usize, i: usize) -> usize {
        match self.encoding {
            InputEncoding::Concatenated => i,
            InputEncoding::ActionConditioned => action * (self.obs_dim + 1) + i,
        }
    }

    /// Index of the constant (bias or action indicator) feature for `action`.
    pub fn action_feature(&self, action: usize) -> usize {
        match self.encoding {
            InputEncoding::Concatenated => self.obs_dim + action,
            InputEncoding::ActionConditioned => action * (self.obs_dim + 1) + self.obs_dim,
        }
    }

    fn check(&self, observation: &[S], action: usize) -> Result<()> {
        if observation.len() != self.obs_dim {
            return Err(Error::DimensionMismatch { expected: self.obs_dim, got: observation.len() });
        }
        if action >= self.action_count {
            return Err(invalid(format!("action {action} out of range for {} actions", self.action_count)));
        }
        Ok(())
    }

    /// Non-zero entries of the input feature vector.
    fn features(&self, observation: &[S], action: usize) -> Vec<(usize, S)> {
        let mut out: Vec<(usize, S)> = observation
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != S::zero())
            .map(|(i, &x)| (self.observation_feature(action, i), x))
            .collect();
        out.push((self.action_feature(action), S::one()));
        out
    }

    fn forward(&self, features: &[(usize, S)]) -> (Vec<S>, S) {
        let d = self.obs_dim;
        let mut next = vec![S::zero(); d];
        let mut reward = S::zero();
        for &(j, x) in features {
            let column = &self.weights[j * d..(j + 1) * d];
            for (o, &w) in next.iter_mut().zip(column) {
                *o += w * x;
            }
            reward += self.reward_weights[j] * x;
        }
        (next, reward)
    }

    pub fn predict(&self, observation: &[S], action: usize) -> Result<(Vec<S>, S)> {
        self.check(observation, action)?;
        Ok(self.forward(&self.features(observation, action)))
    }

    fn loss_of(&self, predicted: &[S], predicted_reward: S, t: &Transition<S>) -> S {
        let d = S::of(self.obs_dim as f64);
        let sq: S = predicted
            .iter()
            .zip(t.next_observation.iter())
            .map(|(&p, &y)| (p - y) * (p - y))
            .sum();
        let r = predicted_reward - t.reward;
        sq / d + r * r
    }

    fn check_transition(&self, t: &Transition<S>) -> Result<()> {
        t.validate()?;
        self.check(&t.observation, t.action)
    }

    /// `|x̂' - x'|² / obs_dim + (r̂ - r)²`.
    pub fn loss(&self, t: &Transition<S>) -> Result<S> {
        self.check_transition(t)?;
        let (next, reward) = self.forward(&self.features(&t.observation, t.action));
        Ok(self.loss_of(&next, reward, t))
    }

    /// Dense gradient of [`loss`](Self::loss) for one transition.
    pub fn loss_gradient(&self, t: &Transition<S>) -> Result<Gradient<S>> {
        self.check_transition(t)?;
        let d = self.obs_dim;
        let features = self.features(&t.observation, t.action);
        let (next, reward) = self.forward(&features);
        let (g_obs, g_reward) = self.output_gradient(&next, reward, t);
        let mut grad = Gradient {
            weights: vec![S::zero(); self.weights.len()],
            reward_weights: vec![S::zero(); self.reward_weights.len()],
        };
        for &(j, x) in &features {
            for (g, &go) in grad.weights[j * d..(j + 1) * d].iter_mut().zip(&g_obs) {
                *g = go * x;
            }
            grad.reward_weights[j] = g_reward * x;
        }
        Ok(grad)
    }

    fn output_gradient(&self, next: &[S], reward: S, t: &Transition<S>) -> (Vec<S>, S) {
        let scale = S::of(2.0) / S::of(self.obs_dim as f64);
        let g_obs = next
            .iter()
            .zip(t.next_observation.iter())
            .map(|(&p, &y)| scale * (p - y))
            .collect();
        (g_obs, S::of(2.0) * (reward - t.reward))
    }

    /// One preconditioned gradient step on the mean batch loss (see the module
    /// docs). Returns each transition's loss as it was before the step.
    pub fn train_batch<T: Borrow<Transition<S>>>(&mut self, batch: &[T]) -> Result<Vec<S>> {
        if batch.is_empty() {
            return Err(invalid("training batch is empty"));
        }
        let d = self.obs_dim;
        let mut losses = Vec::with_capacity(batch.len());
        let mut pending = Vec::with_capacity(batch.len());
        for t in batch {
            let t = t.borrow();
            self.check_transition(t)?;
            let features = self.features(&t.observation, t.action);
            let (next, reward) = self.forward(&features);
            losses.push(self.loss_of(&next, reward, t));
            let g_obs: Vec<S> = next.iter().zip(t.next_observation.iter()).map(|(&p, &y)| p - y).collect();
            pending.push((features, g_obs, reward - t.reward));
        }
        let step = self.learning_rate / S::of(batch.len() as f64);
        for (features, g_obs, g_reward) in pending {
            for (j, x) in features {
                let column = &mut self.weights[j * d..(j + 1) * d];
                for (w, &g) in column.iter_mut().zip(&g_obs) {
                    *w -= step * x * g;
                }
                self.reward_weights[j] -= step * x * g_reward;
            }
        }
        Ok(losses)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.reward_weights).all(|w| w.is_finite())
    }
}

/// Independently initialised dynamics models trained on identical batches.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementEnsemble<S> {
    members: Vec<DynamicsModel<S>>,
}

/// Offset added to the run seed for ensemble member `k`: `seed + ENSEMBLE_SEED_OFFSET + k`.
pub const ENSEMBLE_SEED_OFFSET: u64 = 0x0E5E_0000;

impl<S: Scalar> DisagreementEnsemble<S> {
    pub fn new(
        size: usize,
        obs_dim: usize,
        action_count: usize,
        encoding: InputEncoding,
        learning_rate: S,
        seed: u64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(invalid("ensemble needs at least one member"));
        }
        let members = (0..size as u64)
            .map(|k| {
                let member_seed = seed.wrapping_add(ENSEMBLE_SEED_OFFSET).wrapping_add(k);
                DynamicsModel::new(obs_dim, action_count, encoding, learning_rate, member_seed)
            })
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }

    pub fn from_members(members: Vec<DynamicsModel<S>>) -> Result<Self> {
        let first = members.first().ok_or_else(|| invalid("ensemble needs at least one member"))?;
        let shape = (first.obs_dim, first.action_count, first.encoding);
        if members.iter().any(|m| (m.obs_dim, m.action_count, m.encoding) != shape) {
            return Err(invalid("ensemble members must share input and output shapes"));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[DynamicsModel<S>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean over output dimensions of the across-member population variance
    /// of the predicted next observation.
    pub fn disagreement(&self, observation: &[S], action: usize) -> Result<S> {
        let first = &self.members[0];
        first.check(observation, action)?;
        let features = first.features(observation, action);
        let d = first.obs_dim;
        let k = S::of(self.members.len() as f64);
        let mut preds = Vec::with_capacity(self.members.len());
        for m in &self.members {
            preds.push(m.forward(&features).0);
        }
        // shifted by the first member so identical members give exactly zero
        let mut shift_mean = vec![S::zero(); d];
        for next in &preds {
            for ((s, &x), &x0) in shift_mean.iter_mut().zip(next).zip(&preds[0]) {
                *s += x - x0;
            }
        }
        for s in &mut shift_mean {
            *s /= k;
        }
        let mut sum_sq = vec![S::zero(); d];
        for next in &preds {
            for (((q, &x), &x0), &mu) in sum_sq.iter_mut().zip(next).zip(&preds[0]).zip(&shift_mean) {
                let dev = (x - x0) - mu;
                *q += dev * dev;
            }
        }
        let total: S = sum_sq.iter().map(|&q| q / k).sum();
        Ok(total / S::of(d as f64))
    }

    /// Train every member on the same batch; returns each member's pre-update losses.
    pub fn train_batch<T: Borrow<Transition<S>>>(&mut self, batch: &[T]) -> Result<Vec<Vec<S>>> {
        self.members.iter_mut().map(|m| m.train_batch(batch)).collect()
    }
}
