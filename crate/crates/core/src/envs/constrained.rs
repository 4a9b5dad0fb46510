//! Grid whose right-hand region is walled off until `t0`.
//!
//! Before release, moving right out of the barrier column is blocked. After
//! release the region is open, and inside it the agent earns a reward shaped
//! by its distance to a goal at the middle of the right wall.

use super::{check_size, one_hot_into, Action, Cell, GridDynamics, Outcome, PhaseSchedule};
use crate::error::Result;

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub top_left: Cell,
    pub bottom_right: Cell,
}

impl Region {
    pub fn contains(&self, c: Cell) -> bool {
        (self.top_left.row..=self.bottom_right.row).contains(&c.row)
            && (self.top_left.col..=self.bottom_right.col).contains(&c.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedGrid {
    size: usize,
    schedule: PhaseSchedule,
    episode_length: u64,
    /// Actions unavailable in each region until release.
    blocked_actions_by_region: Vec<(Region, Vec<Action>)>,
    locked: Region,
    goal: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedState {
    pub agent: Cell,
}

impl ConstrainedGrid {
    pub fn new(size: usize, t0: u64, episode_length: u64) -> Result<Self> {
        check_size(size)?;
        let barrier = size / 2;
        let barrier_column = Region { top_left: Cell::new(0, barrier), bottom_right: Cell::new(size - 1, barrier) };
        Ok(Self {
            size,
            schedule: PhaseSchedule::new(vec![t0])?,
            episode_length,
            blocked_actions_by_region: vec![(barrier_column, vec![Action::Right])],
            locked: Region { top_left: Cell::new(0, barrier + 1), bottom_right: Cell::new(size - 1, size - 1) },
            goal: Cell::new(size / 2, size - 1),
        })
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn locked_region(&self) -> Region {
        self.locked
    }

    fn released(phase: u8) -> bool {
        phase >= 1
    }

    fn reward_at(&self, cell: Cell, phase: u8) -> f64 {
        if !Self::released(phase) || !self.locked.contains(cell) {
            return 0.0;
        }
        let max = 2 * (self.size - 1);
        1.0 - cell.manhattan(self.goal) as f64 / max as f64
    }
}

impl GridDynamics for ConstrainedGrid {
    type State = ConstrainedState;

    fn name(&self) -> &'static str {
        "constrained"
    }

    fn size(&self) -> usize {
        self.size
    }

    fn obs_dim(&self) -> usize {
        self.size * self.size
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

    fn initial_state(&self) -> ConstrainedState {
        ConstrainedState { agent: self.start_cell() }
    }

    fn agent_cell(&self, state: &ConstrainedState) -> Cell {
        state.agent
    }

    fn respawn(&self, state: &mut ConstrainedState) {
        state.agent = self.start_cell();
    }

    fn enter_phase(&self, _state: &mut ConstrainedState, _phase: u8) {}

    fn blocked(&self, cell: Cell, action: Action, phase: u8) -> bool {
        !Self::released(phase)
            && self
                .blocked_actions_by_region
                .iter()
                .any(|(region, actions)| region.contains(cell) && actions.contains(&action))
    }

    fn accessible(&self, cell: Cell, phase: u8) -> bool {
        Self::released(phase) || !self.locked.contains(cell)
    }

    fn transition(&self, state: &ConstrainedState, action: Action, phase: u8) -> Outcome<ConstrainedState> {
        let agent = if self.blocked(state.agent, action, phase) {
            state.agent
        } else {
            state.agent.offset(action, self.size).unwrap_or(state.agent)
        };
        Outcome {
            reward: self.reward_at(agent, phase),
            state: ConstrainedState { agent },
            terminal: false,
            interacted: false,
        }
    }

    fn encode(&self, state: &ConstrainedState, _phase: u8) -> Vec<f64> {
        let mut obs = vec![0.0; self.size * self.size];
        one_hot_into(&mut obs, 0, state.agent.index(self.size));
        obs
    }

    fn state_for_phase(&self, cell: Cell, _phase: u8) -> ConstrainedState {
        ConstrainedState { agent: cell }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{reachable_cells, Environment, PhasedGrid};

    #[test]
    fn barrier_blocks_until_release() {
        let g = ConstrainedGrid::new(9, 10, 0).unwrap();
        let s = ConstrainedState { agent: Cell::new(2, 4) };
        assert_eq!(g.transition(&s, Action::Right, 0).state, s);
        let out = g.transition(&s, Action::Right, 1);
        assert_eq!(out.state.agent, Cell::new(2, 5));
        assert!(out.reward > 0.0);
        // other moves from the barrier column stay available
        assert_eq!(g.transition(&s, Action::Left, 0).state.agent, Cell::new(2, 3));
    }

    #[test]
    fn reachability_per_phase() {
        let g = ConstrainedGrid::new(9, 10, 0).unwrap();
        assert_eq!(reachable_cells(&g, 0).len(), 9 * 5);
        assert_eq!(reachable_cells(&g, 1).len(), 81);
    }

    #[test]
    fn shaped_reward_only_in_released_region() {
        let g = ConstrainedGrid::new(9, 10, 0).unwrap();
        assert_eq!(g.reward_at(g.goal(), 1), 1.0);
        assert_eq!(g.reward_at(g.goal(), 0), 0.0);
        assert_eq!(g.reward_at(Cell::new(4, 2), 1), 0.0);
        let near = g.reward_at(Cell::new(4, 7), 1);
        let far = g.reward_at(Cell::new(0, 5), 1);
        assert!(near > far && far > 0.0);
    }

    #[test]
    fn truncation_and_respawn() {
        let mut e = PhasedGrid::new(ConstrainedGrid::new(9, 10, 3).unwrap(), 0).unwrap();
        e.reset(0);
        e.step(Action::Down.id()).unwrap();
        e.step(Action::Down.id()).unwrap();
        let r = e.step(Action::Down.id()).unwrap();
        assert!(r.truncated && !r.terminal);
        let obs = e.begin_episode();
        assert_eq!(obs[0], 1.0);
        assert_eq!(e.global_step(), 3);
    }
}
