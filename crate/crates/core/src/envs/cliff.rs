use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, StateId, Transition};

/// Grid layout and rewards. Cells are `[x, y]` with `y = 0` the bottom row.
///
/// When `cliff`, `goal` or `start` are omitted the classic layout is used:
/// start bottom-left, goal bottom-right, cliff along the bottom row between
/// them. Stepping next to the cliff edge is the shortest route to the goal,
/// and one wrong move from it is catastrophic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliffGridParams {
    pub width: usize,
    pub height: usize,
    pub step_reward: f64,
    pub cliff_reward: f64,
    pub goal_reward: f64,
    pub discount: f64,
    pub max_episode_length: usize,
    pub cliff: Option<Vec<[usize; 2]>>,
    pub goal: Option<[usize; 2]>,
    pub start: Option<[usize; 2]>,
}

impl Default for CliffGridParams {
    fn default() -> Self {
        Self {
            width: 4,
            height: 3,
            step_reward: 0.0,
            cliff_reward: -1.0,
            goal_reward: 1.0,
            discount: 0.95,
            max_episode_length: 30,
            cliff: None,
            goal: None,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Free,
    Cliff,
    Goal,
}

/// Deterministic grid walk with a cliff. Actions: 0 up, 1 right, 2 down, 3 left.
/// Moves into the border leave the agent in place.
#[derive(Debug, Clone)]
pub struct CliffGrid {
    params: CliffGridParams,
    cells: Vec<CellKind>,
    start: StateId,
}

pub const UP: ActionId = 0;
pub const RIGHT: ActionId = 1;
pub const DOWN: ActionId = 2;
pub const LEFT: ActionId = 3;

impl CliffGrid {
    pub fn new(params: CliffGridParams) -> Result<Self> {
        let (w, h) = (params.width, params.height);
        if w == 0 || h == 0 {
            return Err(Error::Validation("cliff_grid: width and height must be positive".into()));
        }
        if !(params.discount > 0.0 && params.discount <= 1.0) {
            return Err(Error::Validation(format!(
                "cliff_grid: discount {} outside (0, 1]",
                params.discount
            )));
        }
        if params.max_episode_length == 0 {
            return Err(Error::Validation("cliff_grid: max_episode_length must be positive".into()));
        }
        let start = params.start.unwrap_or([0, 0]);
        let goal = params.goal.unwrap_or([w - 1, 0]);
        let cliff = params
            .cliff
            .clone()
            .unwrap_or_else(|| (1..w.saturating_sub(1)).map(|x| [x, 0]).collect());
        let in_bounds = |c: [usize; 2]| c[0] < w && c[1] < h;
        for c in cliff.iter().chain([&goal, &start]) {
            if !in_bounds(*c) {
                return Err(Error::Validation(format!("cliff_grid: cell {c:?} out of bounds")));
            }
        }
        let mut cells = vec![CellKind::Free; w * h];
        for c in &cliff {
            cells[c[1] * w + c[0]] = CellKind::Cliff;
        }
        let gi = goal[1] * w + goal[0];
        if cells[gi] == CellKind::Cliff {
            return Err(Error::Validation("cliff_grid: goal lies on the cliff".into()));
        }
        cells[gi] = CellKind::Goal;
        let si = start[1] * w + start[0];
        if cells[si] != CellKind::Free {
            return Err(Error::Validation("cliff_grid: start must be a free cell".into()));
        }
        Ok(Self {
            params,
            cells,
            start: si,
        })
    }

    pub fn params(&self) -> &CliffGridParams {
        &self.params
    }

    pub fn cell(&self, state: StateId) -> [usize; 2] {
        [state % self.params.width, state / self.params.width]
    }

    pub fn state_of(&self, cell: [usize; 2]) -> StateId {
        cell[1] * self.params.width + cell[0]
    }

    pub fn is_cliff(&self, state: StateId) -> bool {
        self.cells[state] == CellKind::Cliff
    }

    pub fn is_goal(&self, state: StateId) -> bool {
        self.cells[state] == CellKind::Goal
    }
}

impl MdpModel for CliffGrid {
    fn name(&self) -> &str {
        "cliff_grid"
    }

    fn state_count(&self) -> usize {
        self.cells.len()
    }

    fn action_count(&self, _state: StateId) -> usize {
        4
    }

    fn transition(&self, state: StateId, action: ActionId) -> Transition {
        if self.cells[state] != CellKind::Free {
            return Transition {
                next_state: state,
                reward: 0.0,
                terminal: true,
            };
        }
        let [x, y] = self.cell(state);
        let (w, h) = (self.params.width, self.params.height);
        let (nx, ny) = match action {
            UP => (x, (y + 1).min(h - 1)),
            RIGHT => ((x + 1).min(w - 1), y),
            DOWN => (x, y.saturating_sub(1)),
            _ => (x.saturating_sub(1), y),
        };
        let next_state = self.state_of([nx, ny]);
        let (reward, terminal) = match self.cells[next_state] {
            CellKind::Free => (self.params.step_reward, false),
            CellKind::Cliff => (self.params.cliff_reward, true),
            CellKind::Goal => (self.params.goal_reward, true),
        };
        Transition {
            next_state,
            reward,
            terminal,
        }
    }

    fn discount(&self) -> f64 {
        self.params.discount
    }

    fn initial_state(&self) -> StateId {
        self.start
    }

    fn reward_bound(&self) -> f64 {
        self.params
            .step_reward
            .abs()
            .max(self.params.cliff_reward.abs())
            .max(self.params.goal_reward.abs())
    }

    fn horizon_bound(&self) -> usize {
        self.cells.len()
    }

    fn max_episode_length(&self) -> usize {
        self.params.max_episode_length
    }

    fn describe_state(&self, state: StateId) -> String {
        let [x, y] = self.cell(state);
        format!("({x},{y})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_three_has_twelve_states() {
        let g = CliffGrid::new(CliffGridParams::default()).unwrap();
        assert_eq!(g.state_count(), 12);
        assert_eq!(g.initial_state(), 0);
        assert!(g.is_goal(3));
        assert!(g.is_cliff(1) && g.is_cliff(2));
    }

    #[test]
    fn stepping_right_from_start_falls() {
        let g = CliffGrid::new(CliffGridParams::default()).unwrap();
        let t = g.transition(0, RIGHT);
        assert!(t.terminal);
        assert_eq!(t.reward, -1.0);
        let up = g.transition(0, UP);
        assert!(!up.terminal);
        assert_eq!(up.next_state, 4);
    }

    #[test]
    fn border_moves_stay_in_place() {
        let g = CliffGrid::new(CliffGridParams::default()).unwrap();
        assert_eq!(g.transition(0, LEFT).next_state, 0);
        assert_eq!(g.transition(0, DOWN).next_state, 0);
        assert_eq!(g.transition(11, UP).next_state, 11);
    }

    #[test]
    fn goal_on_cliff_rejected() {
        let p = CliffGridParams {
            goal: Some([1, 0]),
            ..Default::default()
        };
        assert!(matches!(CliffGrid::new(p), Err(Error::Validation(_))));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let p = CliffGridParams {
            cliff: Some(vec![[9, 9]]),
            ..Default::default()
        };
        assert!(CliffGrid::new(p).is_err());
    }
}
