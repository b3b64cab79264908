//! Decision-process abstraction, trajectories and discounted returns.
//!
//! States and actions are dense integer identifiers. Actions available in a
//! state are `0..action_count(state)`. Termination is a property of a
//! transition: the episode ends after a transition flagged `terminal`, and
//! the value beyond it is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

/// Outcome of taking one action in one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub next_state: StateId,
    pub reward: f64,
    pub terminal: bool,
}

/// A deterministic, lazily queried decision process.
///
/// Implementations must be pure: `transition` returns the same value for the
/// same inputs no matter how many workers call it concurrently.
///
/// Two-player zero-sum games report `two_player() == true`. Their rewards are
/// from the perspective of the player who moves, and values are always stored
/// from the perspective of the player to move, so a value one ply deeper is
/// negated when it is folded into the parent (see [`MdpModel::continuation`]).
pub trait MdpModel: Send + Sync {
    fn name(&self) -> &str;

    fn state_count(&self) -> usize;

    /// Number of legal actions. Positive for every state a non-terminal
    /// transition can reach.
    fn action_count(&self, state: StateId) -> usize;

    fn transition(&self, state: StateId, action: ActionId) -> Transition;

    fn discount(&self) -> f64;

    fn initial_state(&self) -> StateId;

    /// Upper bound on `|reward|` for every transition.
    fn reward_bound(&self) -> f64;

    /// Every reachable state is reachable within this many steps.
    fn horizon_bound(&self) -> usize;

    /// Episodes run by the harness are truncated after this many steps.
    fn max_episode_length(&self) -> usize;

    fn two_player(&self) -> bool {
        false
    }

    /// Whether the state space may be enumerated by the exact oracle.
    fn enumerable(&self) -> bool {
        true
    }

    /// Factor applied to a successor's value when folding it into its parent:
    /// `discount` for single-agent models, `-discount` for alternating games.
    fn continuation(&self) -> f64 {
        if self.two_player() {
            -self.discount()
        } else {
            self.discount()
        }
    }

    fn describe_state(&self, state: StateId) -> String {
        state.to_string()
    }
}

/// One step of a trajectory: the action taken in `state` and its reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
}

/// A path through the model ending in `leaf_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub leaf_state: StateId,
}

impl Trajectory {
    pub fn empty(state: StateId) -> Self {
        Self {
            steps: Vec::new(),
            leaf_state: state,
        }
    }

    /// Follows `actions` from `start`, stopping early at a terminal transition.
    pub fn follow(model: &dyn MdpModel, start: StateId, actions: &[ActionId]) -> Self {
        let mut steps = Vec::with_capacity(actions.len());
        let mut state = start;
        for &action in actions {
            let t = model.transition(state, action);
            steps.push(Step {
                state,
                action,
                reward: t.reward,
            });
            state = t.next_state;
            if t.terminal {
                break;
            }
        }
        Self {
            steps,
            leaf_state: state,
        }
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn rewards(&self) -> impl DoubleEndedIterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }

    /// Checks that consecutive steps agree with the model's transitions.
    pub fn is_consistent(&self, model: &dyn MdpModel) -> bool {
        for (k, step) in self.steps.iter().enumerate() {
            let t = model.transition(step.state, step.action);
            if t.reward != step.reward {
                return false;
            }
            let next = self
                .steps
                .get(k + 1)
                .map(|s| s.state)
                .unwrap_or(self.leaf_state);
            if t.next_state != next {
                return false;
            }
        }
        true
    }
}

/// `sum_k discount^k * reward_k + discount^depth * bootstrap`.
///
/// Evaluated backwards so that it matches the per-node recurrence used by
/// backpropagation bit for bit.
pub fn discounted_return(traj: &Trajectory, bootstrap: f64, discount: f64) -> f64 {
    fold_return(traj.rewards(), bootstrap, discount)
}

/// Return of the suffix of `traj` starting at step `from_depth`.
pub fn suffix_return(
    traj: &Trajectory,
    from_depth: usize,
    bootstrap: f64,
    discount: f64,
) -> Result<f64> {
    if from_depth > traj.depth() {
        return Err(Error::Range {
            index: from_depth,
            max: traj.depth(),
        });
    }
    Ok(fold_return(
        traj.steps[from_depth..].iter().map(|s| s.reward),
        bootstrap,
        discount,
    ))
}

pub(crate) fn fold_return<I>(rewards: I, bootstrap: f64, discount: f64) -> f64
where
    I: DoubleEndedIterator<Item = f64>,
{
    rewards.rev().fold(bootstrap, |acc, r| r + discount * acc)
}
