//! Deterministic gridworlds whose dynamics or observations change at
//! scheduled global steps.
//!
//! Each world is described by a [`GridDynamics`] implementation (a pure
//! transition function over a small state) and driven by [`PhasedGrid`],
//! which owns the step counter, applies phase changes exactly at their
//! scheduled steps and builds the held-out test sets.

mod constrained;
mod novel_object;
mod phase_swap;

use std::collections::VecDeque;
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::replay::Transition;

pub use constrained::{ConstrainedGrid, ConstrainedState};
pub use novel_object::{NovelObjectGrid, NovelObjectState};
pub use phase_swap::{PhaseSwapGrid, PhaseSwapState};

pub const ACTION_COUNT: usize = 5;

/// Transitions per phase in each held-out test set.
pub const HELDOUT_SIZE: usize = 256;
const HELDOUT_ROLLOUT_LEN: usize = 32;
const HELDOUT_SEED_SALT: u64 = 0x4845_4C44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stay = 4,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn from_id(id: usize) -> Result<Self> {
        Self::ALL
            .get(id)
            .copied()
            .ok_or_else(|| invalid(format!("action id {id} out of range 0..{ACTION_COUNT}")))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Neighbour in direction `action`, or `None` past the border of a `size`×`size` grid.
    pub fn offset(self, action: Action, size: usize) -> Option<Cell> {
        let (dr, dc) = action.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        (row < size && col < size).then_some(Cell { row, col })
    }

    pub fn index(self, size: usize) -> usize {
        self.row * size + self.col
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

/// Sorted change steps `T0 < T1 < ...`; the phase is the number of change
/// steps at or before the current global step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    change_steps: Vec<u64>,
}

impl PhaseSchedule {
    pub fn new(change_steps: Vec<u64>) -> Result<Self> {
        if change_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("phase change steps must be strictly increasing"));
        }
        if change_steps.len() >= u8::MAX as usize {
            return Err(invalid("too many phase changes"));
        }
        Ok(Self { change_steps })
    }

    pub fn change_steps(&self) -> &[u64] {
        &self.change_steps
    }

    pub fn phase_of(&self, step: u64) -> u8 {
        self.change_steps.partition_point(|&t| t <= step) as u8
    }

    pub fn phase_count(&self) -> usize {
        self.change_steps.len() + 1
    }

    /// Step at which `phase` begins (0 for phase 0).
    pub fn start_of(&self, phase: u8) -> Option<u64> {
        match phase {
            0 => Some(0),
            p => self.change_steps.get(p as usize - 1).copied(),
        }
    }
}

/// Result of one deterministic transition of a [`GridDynamics`] state.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<St> {
    pub state: St,
    pub reward: f64,
    pub terminal: bool,
    pub interacted: bool,
}

/// Pure description of a phased gridworld.
pub trait GridDynamics: Clone + Debug + Send {
    type State: Clone + PartialEq + Debug + Send;

    fn name(&self) -> &'static str;
    fn size(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn schedule(&self) -> &PhaseSchedule;
    fn start_cell(&self) -> Cell;
    /// Steps per episode before the agent respawns at the start; 0 means never.
    fn episode_length(&self) -> u64;

    fn initial_state(&self) -> Self::State;
    fn agent_cell(&self, state: &Self::State) -> Cell;
    /// Move the agent back to the start, leaving the rest of the world as it is.
    fn respawn(&self, state: &mut Self::State);
    /// Apply the scheduled change that begins `phase`.
    fn enter_phase(&self, state: &mut Self::State, phase: u8);
    fn transition(&self, state: &Self::State, action: Action, phase: u8) -> Outcome<Self::State>;
    fn encode(&self, state: &Self::State, phase: u8) -> Vec<f64>;

    /// Whether the agent alone may move from `cell` via `action` in `phase`.
    fn blocked(&self, _cell: Cell, _action: Action, _phase: u8) -> bool {
        false
    }

    /// Cells the agent is meant to reach in `phase`.
    fn accessible(&self, _cell: Cell, _phase: u8) -> bool {
        true
    }

    /// State at the start of `phase` with the agent at `cell`, used to seed held-out rollouts.
    fn state_for_phase(&self, cell: Cell, phase: u8) -> Self::State;
}

/// Outcome of [`Environment::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// The episode reached its length limit; the next step starts from a respawn.
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    /// Phase of the returned observation.
    pub phase_tag: u8,
    /// Global step after this transition.
    pub global_step: u64,
    pub interaction_count: u64,
    pub interacted: bool,
}

/// Fixed transitions per phase, never added to a replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutSet {
    pub phase: u8,
    pub transitions: Vec<Transition<f64>>,
}

/// Object-safe environment interface used by the agent and the harness.
pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn action_count(&self) -> usize {
        ACTION_COUNT
    }
    fn schedule(&self) -> &PhaseSchedule;
    /// Reset to the start cell and global step 0.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepResult>;
    /// Respawn the agent after a terminal or truncated step; returns the new observation.
    fn begin_episode(&mut self) -> Vec<f64>;
    fn observation(&self) -> Vec<f64>;
    fn global_step(&self) -> u64;
    fn phase(&self) -> u8 {
        self.schedule().phase_of(self.global_step())
    }
    fn interaction_count(&self) -> u64;
    /// Global steps (after the move) at which interactions happened.
    fn interaction_steps(&self) -> &[u64];
    fn heldout(&self) -> &[HeldoutSet];
}

/// Drives a [`GridDynamics`] through its phase schedule.
#[derive(Debug, Clone)]
pub struct PhasedGrid<D: GridDynamics> {
    dynamics: D,
    state: D::State,
    global_step: u64,
    episode_step: u64,
    interactions: Vec<u64>,
    seed: u64,
    heldout: Vec<HeldoutSet>,
}

impl<D: GridDynamics> PhasedGrid<D> {
    pub fn new(dynamics: D, seed: u64) -> Result<Self> {
        check_reachability(&dynamics)?;
        let heldout = build_heldout(&dynamics, seed);
        let mut env = Self {
            state: dynamics.initial_state(),
            dynamics,
            global_step: 0,
            episode_step: 0,
            interactions: Vec::new(),
            seed,
            heldout,
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn state(&self) -> &D::State {
        &self.state
    }

    pub fn agent_cell(&self) -> Cell {
        self.dynamics.agent_cell(&self.state)
    }

    fn enter_phases(&mut self, from: Option<u8>, to: u8) {
        let first = from.map_or(0, |p| p + 1);
        for phase in first..=to {
            if phase > 0 {
                self.dynamics.enter_phase(&mut self.state, phase);
            }
        }
    }
}

impl<D: GridDynamics> Environment for PhasedGrid<D> {
    fn name(&self) -> &'static str {
        self.dynamics.name()
    }

    fn obs_dim(&self) -> usize {
        self.dynamics.obs_dim()
    }

    fn schedule(&self) -> &PhaseSchedule {
        self.dynamics.schedule()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        if seed != self.seed {
            self.seed = seed;
            self.heldout = build_heldout(&self.dynamics, seed);
        }
        self.state = self.dynamics.initial_state();
        self.global_step = 0;
        self.episode_step = 0;
        self.interactions.clear();
        let phase = self.phase();
        self.enter_phases(None, phase);
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let action = Action::from_id(action)?;
        let phase = self.phase();
        let outcome = self.dynamics.transition(&self.state, action, phase);
        self.state = outcome.state;
        self.global_step += 1;
        self.episode_step += 1;
        if outcome.interacted {
            self.interactions.push(self.global_step);
        }
        let next_phase = self.phase();
        if next_phase != phase {
            self.enter_phases(Some(phase), next_phase);
        }
        let limit = self.dynamics.episode_length();
        Ok(StepResult {
            observation: self.observation(),
            reward: outcome.reward,
            terminal: outcome.terminal,
            truncated: !outcome.terminal && limit > 0 && self.episode_step >= limit,
            info: StepInfo {
                phase_tag: next_phase,
                global_step: self.global_step,
                interaction_count: self.interactions.len() as u64,
                interacted: outcome.interacted,
            },
        })
    }

    fn begin_episode(&mut self) -> Vec<f64> {
        self.dynamics.respawn(&mut self.state);
        self.episode_step = 0;
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        self.dynamics.encode(&self.state, self.phase())
    }

    fn global_step(&self) -> u64 {
        self.global_step
    }

    fn interaction_count(&self) -> u64 {
        self.interactions.len() as u64
    }

    fn interaction_steps(&self) -> &[u64] {
        &self.interactions
    }

    fn heldout(&self) -> &[HeldoutSet] {
        &self.heldout
    }
}

/// Cells reachable from the start in `phase` by agent moves alone.
pub fn reachable_cells<D: GridDynamics>(dynamics: &D, phase: u8) -> Vec<Cell> {
    let size = dynamics.size();
    let mut seen = vec![false; size * size];
    let start = dynamics.start_cell();
    let mut queue = VecDeque::from([start]);
    seen[start.index(size)] = true;
    let mut out = Vec::new();
    while let Some(cell) = queue.pop_front() {
        out.push(cell);
        for action in Action::MOVES {
            if dynamics.blocked(cell, action, phase) {
                continue;
            }
            if let Some(next) = cell.offset(action, size) {
                if !seen[next.index(size)] {
                    seen[next.index(size)] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    out.sort();
    out
}

fn check_reachability<D: GridDynamics>(dynamics: &D) -> Result<()> {
    let size = dynamics.size();
    for phase in 0..dynamics.schedule().phase_count() as u8 {
        let reached = reachable_cells(dynamics, phase);
        let expected: Vec<Cell> = (0..size * size)
            .map(|i| Cell::new(i / size, i % size))
            .filter(|&c| dynamics.accessible(c, phase))
            .collect();
        if reached != expected {
            return Err(invalid(format!(
                "{}: phase {phase} reaches {} cells, expected {}",
                dynamics.name(),
                reached.len(),
                expected.len()
            )));
        }
    }
    Ok(())
}

/// Scripted random-walk rollouts in each phase, `HELDOUT_SIZE` transitions per phase.
fn build_heldout<D: GridDynamics>(dynamics: &D, seed: u64) -> Vec<HeldoutSet> {
    let schedule = dynamics.schedule();
    (0..schedule.phase_count() as u8)
        .map(|phase| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ HELDOUT_SEED_SALT ^ ((phase as u64) << 32));
            let cells = reachable_cells(dynamics, phase);
            let mut transitions = Vec::with_capacity(HELDOUT_SIZE);
            while transitions.len() < HELDOUT_SIZE {
                let start = cells[rng.gen_range(0..cells.len())];
                let mut state = dynamics.state_for_phase(start, phase);
                let mut obs: std::sync::Arc<[f64]> = dynamics.encode(&state, phase).into();
                for _ in 0..HELDOUT_ROLLOUT_LEN.min(HELDOUT_SIZE - transitions.len()) {
                    let action = Action::ALL[rng.gen_range(0..ACTION_COUNT)];
                    let out = dynamics.transition(&state, action, phase);
                    let next: std::sync::Arc<[f64]> = dynamics.encode(&out.state, phase).into();
                    transitions.push(
                        Transition::new(obs.clone(), action.id(), out.reward, next.clone(), out.terminal)
                            .with_step(0, Some(phase)),
                    );
                    if out.terminal {
                        break;
                    }
                    state = out.state;
                    obs = next;
                }
            }
            HeldoutSet { phase, transitions }
        })
        .collect()
}

/// Steps from `t0` until the `k`-th interaction, given the global steps at
/// which interactions occurred (in order).
pub fn steps_to_kth_interaction(interaction_steps: &[u64], t0: u64, k: usize) -> Option<u64> {
    if k == 0 {
        return None;
    }
    interaction_steps.get(k - 1).map(|&s| s.saturating_sub(t0))
}

pub(crate) fn one_hot_into(out: &mut [f64], offset: usize, index: usize) {
    out[offset + index] = 1.0;
}

/// Serializable choice of environment and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    NovelObject {
        size: usize,
        t0: u64,
        /// Step at which the object is removed again.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t1: Option<u64>,
    },
    Constrained {
        size: usize,
        t0: u64,
        episode_length: u64,
    },
    PhaseSwap {
        size: usize,
        t0: u64,
        t1: u64,
        episode_length: u64,
    },
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::NovelObject { size: 9, t0: 20_000, t1: None }
    }
}

impl EnvConfig {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match *self {
            EnvConfig::NovelObject { size, t0, t1 } => {
                Box::new(PhasedGrid::new(NovelObjectGrid::new(size, t0, t1)?, seed)?)
            }
            EnvConfig::Constrained { size, t0, episode_length } => {
                Box::new(PhasedGrid::new(ConstrainedGrid::new(size, t0, episode_length)?, seed)?)
            }
            EnvConfig::PhaseSwap { size, t0, t1, episode_length } => {
                Box::new(PhasedGrid::new(PhaseSwapGrid::new(size, t0, t1, episode_length)?, seed)?)
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::NovelObject { .. } => "novel_object",
            EnvConfig::Constrained { .. } => "constrained",
            EnvConfig::PhaseSwap { .. } => "phase_swap",
        }
    }

    /// First scheduled change step.
    pub fn t0(&self) -> u64 {
        match *self {
            EnvConfig::NovelObject { t0, .. } | EnvConfig::Constrained { t0, .. } | EnvConfig::PhaseSwap { t0, .. } => t0,
        }
    }
}

pub(crate) fn check_size(size: usize) -> Result<()> {
    if size < 3 {
        return Err(invalid(format!("grid size must be at least 3, got {size}")));
    }
    Ok(())
}
