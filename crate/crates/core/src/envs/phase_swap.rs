//! Goal-reaching grid whose observed background changes at `t0` and reverts at `t1`.
//!
//! Observation: `one_hot(agent) ⊕ one_hot(background)` with two background
//! values. Dynamics and reward are the same in every phase; only the
//! appearance changes.

use super::{check_size, one_hot_into, Cell, GridDynamics, Outcome, PhaseSchedule};
use crate::envs::Action;
use crate::error::{invalid, Result};

pub const BACKGROUNDS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSwapGrid {
    size: usize,
    schedule: PhaseSchedule,
    episode_length: u64,
    goal: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSwapState {
    pub agent: Cell,
}

impl PhaseSwapGrid {
    pub fn new(size: usize, t0: u64, t1: u64, episode_length: u64) -> Result<Self> {
        check_size(size)?;
        if t1 <= t0 {
            return Err(invalid("background revert step t1 must follow t0"));
        }
        Ok(Self {
            size,
            schedule: PhaseSchedule::new(vec![t0, t1])?,
            episode_length,
            goal: Cell::new(size - 1, size - 1),
        })
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    /// Background shown in `phase`: the original everywhere except between `t0` and `t1`.
    pub fn background_id(phase: u8) -> usize {
        usize::from(phase == 1)
    }
}

impl GridDynamics for PhaseSwapGrid {
    type State = PhaseSwapState;

    fn name(&self) -> &'static str {
        "phase_swap"
    }

    fn size(&self) -> usize {
        self.size
    }

    fn obs_dim(&self) -> usize {
        self.size * self.size + BACKGROUNDS
    }

    fn schedule(&self) -> &PhaseSchedule {
        &self.schedule
    }

    fn start_cell(&self) -> Cell {
        Cell::new(0, 0)
    }

    fn episode_length(&self) -> u64 {
        self.episode_length
    }

    fn initial_state(&self) -> PhaseSwapState {
        PhaseSwapState { agent: self.start_cell() }
    }

    fn agent_cell(&self, state: &PhaseSwapState) -> Cell {
        state.agent
    }

    fn respawn(&self, state: &mut PhaseSwapState) {
        state.agent = self.start_cell();
    }

    fn enter_phase(&self, _state: &mut PhaseSwapState, _phase: u8) {}

    fn transition(&self, state: &PhaseSwapState, action: Action, _phase: u8) -> Outcome<PhaseSwapState> {
        let agent = state.agent.offset(action, self.size).unwrap_or(state.agent);
        let at_goal = agent == self.goal;
        Outcome {
            state: PhaseSwapState { agent },
            reward: if at_goal { 1.0 } else { 0.0 },
            terminal: at_goal,
            interacted: false,
        }
    }

    fn encode(&self, state: &PhaseSwapState, phase: u8) -> Vec<f64> {
        let cells = self.size * self.size;
        let mut obs = vec![0.0; cells + BACKGROUNDS];
        one_hot_into(&mut obs, 0, state.agent.index(self.size));
        one_hot_into(&mut obs, cells, Self::background_id(phase));
        obs
    }

    fn state_for_phase(&self, cell: Cell, _phase: u8) -> PhaseSwapState {
        PhaseSwapState { agent: cell }
    }
}
