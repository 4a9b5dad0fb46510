//! Reward-free arena in which a pushable object appears at `t0` (and
//! optionally disappears again at `t1`).
//!
//! Observation: `one_hot(agent) ⊕ one_hot(object)`, the object block being
//! all zeros while no object is present. Moving into the object's cell is an
//! interaction: the object is pushed one cell further in the same direction
//! and the agent takes its place, unless the object is against a wall, in
//! which case neither moves.

use super::{check_size, one_hot_into, Action, Cell, GridDynamics, Outcome, PhaseSchedule};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NovelObjectGrid {
    size: usize,
    schedule: PhaseSchedule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NovelObjectState {
    pub agent: Cell,
    pub object: Option<Cell>,
}

impl NovelObjectGrid {
    pub fn new(size: usize, t0: u64, t1: Option<u64>) -> Result<Self> {
        check_size(size)?;
        let steps = match t1 {
            Some(t1) if t1 <= t0 => return Err(invalid("object removal step t1 must follow t0")),
            Some(t1) => vec![t0, t1],
            None => vec![t0],
        };
        Ok(Self { size, schedule: PhaseSchedule::new(steps)? })
    }

    pub fn center(&self) -> Cell {
        Cell::new(self.size / 2, self.size / 2)
    }

    /// Object is present in phase 1 only.
    fn object_phase(phase: u8) -> bool {
        phase == 1
    }

    /// Center, or the first free neighbour of it when the agent stands there.
    fn spawn_cell(&self, agent: Cell) -> Cell {
        let center = self.center();
        if agent != center {
            return center;
        }
        Action::MOVES
            .iter()
            .find_map(|&a| center.offset(a, self.size))
            .expect("grids of size >= 3 have neighbours")
    }
}

impl GridDynamics for NovelObjectGrid {
    type State = NovelObjectState;

    fn name(&self) -> &'static str {
        "novel_object"
    }

    fn size(&self) -> usize {
        self.size
    }

    fn obs_dim(&self) -> usize {
        2 * self.size * self.size
    }

    fn schedule(&self) -> &PhaseSchedule {
        &self.schedule
    }

    fn start_cell(&self) -> Cell {
        Cell::new(0, 0)
    }

    fn episode_length(&self) -> u64 {
        0
    }

    fn initial_state(&self) -> NovelObjectState {
        NovelObjectState { agent: self.start_cell(), object: None }
    }

    fn agent_cell(&self, state: &NovelObjectState) -> Cell {
        state.agent
    }

    fn respawn(&self, state: &mut NovelObjectState) {
        let start = self.start_cell();
        state.agent = if state.object == Some(start) {
            start.offset(Action::Right, self.size).expect("size >= 3")
        } else {
            start
        };
    }

    fn enter_phase(&self, state: &mut NovelObjectState, phase: u8) {
        state.object = Self::object_phase(phase).then(|| self.spawn_cell(state.agent));
    }

    fn transition(&self, state: &NovelObjectState, action: Action, _phase: u8) -> Outcome<NovelObjectState> {
        let mut next = state.clone();
        let mut interacted = false;
        if action != Action::Stay {
            if let Some(target) = state.agent.offset(action, self.size) {
                if Some(target) == state.object {
                    interacted = true;
                    if let Some(pushed) = target.offset(action, self.size) {
                        next.object = Some(pushed);
                        next.agent = target;
                    }
                } else {
                    next.agent = target;
                }
            }
        }
        Outcome { state: next, reward: 0.0, terminal: false, interacted }
    }

    fn encode(&self, state: &NovelObjectState, _phase: u8) -> Vec<f64> {
        let cells = self.size * self.size;
        let mut obs = vec![0.0; 2 * cells];
        one_hot_into(&mut obs, 0, state.agent.index(self.size));
        if let Some(object) = state.object {
            one_hot_into(&mut obs, cells, object.index(self.size));
        }
        obs
    }

    fn state_for_phase(&self, cell: Cell, phase: u8) -> NovelObjectState {
        let mut state = NovelObjectState { agent: cell, object: None };
        self.enter_phase(&mut state, phase);
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Environment, PhasedGrid};

    fn env(t0: u64, t1: Option<u64>) -> PhasedGrid<NovelObjectGrid> {
        PhasedGrid::new(NovelObjectGrid::new(9, t0, t1).unwrap(), 0).unwrap()
    }

    fn object_block(obs: &[f64]) -> &[f64] {
        &obs[81..]
    }

    #[test]
    fn reset_is_deterministic_and_object_free() {
        let mut e = env(100, None);
        let a = e.reset(5);
        let b = e.reset(5);
        assert_eq!(a, b);
        assert!(object_block(&a).iter().all(|&x| x == 0.0));
        assert_eq!(a[0], 1.0);
    }

    #[test]
    fn wall_clipping() {
        let mut e = env(100, None);
        e.reset(0);
        let r = e.step(Action::Up.id()).unwrap();
        assert_eq!(e.agent_cell(), Cell::new(0, 0));
        assert_eq!(r.observation[0], 1.0);
        e.step(Action::Left.id()).unwrap();
        assert_eq!(e.agent_cell(), Cell::new(0, 0));
        assert!(e.step(7).is_err());
    }

    #[test]
    fn object_appears_exactly_at_t0() {
        let t0 = 10;
        let mut e = env(t0, None);
        e.reset(0);
        for step in 1..=t0 {
            let r = e.step(Action::Stay.id()).unwrap();
            let has_object = object_block(&r.observation).iter().any(|&x| x != 0.0);
            assert_eq!(has_object, step >= t0, "step {step}");
            assert_eq!(r.info.phase_tag, u8::from(step >= t0));
        }
        let obs = e.observation();
        assert_eq!(object_block(&obs)[Cell::new(4, 4).index(9)], 1.0);
        assert_eq!(obs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn push_counts_interaction() {
        let mut e = env(0, None);
        e.reset(0);
        // walk to (4, 3), left of the object at the center
        for a in [Action::Down; 4].into_iter().chain([Action::Right; 3]) {
            e.step(a.id()).unwrap();
        }
        assert_eq!(e.agent_cell(), Cell::new(4, 3));
        assert_eq!(e.interaction_count(), 0);
        let r = e.step(Action::Right.id()).unwrap();
        assert!(r.info.interacted);
        assert_eq!(r.info.interaction_count, 1);
        assert_eq!(e.agent_cell(), Cell::new(4, 4));
        assert_eq!(e.state().object, Some(Cell::new(4, 5)));
        assert_eq!(e.interaction_steps(), &[8]);
    }

    #[test]
    fn object_against_wall_does_not_move() {
        let g = NovelObjectGrid::new(5, 0, None).unwrap();
        let s = NovelObjectState { agent: Cell::new(0, 3), object: Some(Cell::new(0, 4)) };
        let out = g.transition(&s, Action::Right, 1);
        assert!(out.interacted);
        assert_eq!(out.state, s);
    }

    #[test]
    fn object_spawns_beside_agent_on_center() {
        let g = NovelObjectGrid::new(9, 5, None).unwrap();
        let mut s = NovelObjectState { agent: Cell::new(4, 4), object: None };
        g.enter_phase(&mut s, 1);
        assert_eq!(s.object, Some(Cell::new(3, 4)));
    }

    #[test]
    fn object_disappears_at_t1() {
        let mut e = env(3, Some(6));
        e.reset(0);
        let phases: Vec<_> = (0..8).map(|_| e.step(Action::Stay.id()).unwrap().info.phase_tag).collect();
        assert_eq!(phases, vec![0, 0, 1, 1, 1, 2, 2, 2]);
        assert!(object_block(&e.observation()).iter().all(|&x| x == 0.0));
        assert!(NovelObjectGrid::new(9, 10, Some(10)).is_err());
    }

    #[test]
    fn trajectory_is_pure_function_of_actions() {
        let actions: Vec<usize> = (0..500).map(|i| (i * 7 + i / 3) % 5).collect();
        let run = || {
            let mut e = env(100, Some(300));
            e.reset(1);
            actions.iter().map(|&a| e.step(a).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn heldout_phase_purity() {
        let e = env(100, Some(300));
        for set in e.heldout() {
            for t in &set.transitions {
                let present = object_block(&t.observation).iter().any(|&x| x != 0.0);
                assert_eq!(present, set.phase == 1);
                assert_eq!(t.phase_tag, Some(set.phase));
            }
        }
    }
}
