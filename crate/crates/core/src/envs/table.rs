use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, StateId, Transition};

/// Explicitly tabulated model, mostly for hand-built test cases.
#[derive(Debug, Clone)]
pub struct TableMdp {
    transitions: Vec<Vec<Transition>>,
    discount: f64,
    initial: StateId,
    two_player: bool,
    max_episode_length: usize,
}

impl TableMdp {
    pub fn new(transitions: Vec<Vec<Transition>>, discount: f64, initial: StateId) -> Result<Self> {
        let n = transitions.len();
        if n == 0 || initial >= n {
            return Err(Error::Validation("table model needs a valid initial state".into()));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Validation(format!("discount {discount} outside (0, 1]")));
        }
        for (s, row) in transitions.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Validation(format!("state {s} has no actions")));
            }
            if let Some(t) = row.iter().find(|t| t.next_state >= n) {
                return Err(Error::Validation(format!(
                    "state {s} transitions to unknown state {}",
                    t.next_state
                )));
            }
        }
        Ok(Self {
            transitions,
            discount,
            initial,
            two_player: false,
            max_episode_length: 2 * n + 1,
        })
    }

    pub fn with_two_player(mut self, two_player: bool) -> Self {
        self.two_player = two_player;
        self
    }

    pub fn with_max_episode_length(mut self, len: usize) -> Self {
        self.max_episode_length = len;
        self
    }
}

/// Shorthand for building table rows.
pub fn edge(next_state: StateId, reward: f64, terminal: bool) -> Transition {
    Transition {
        next_state,
        reward,
        terminal,
    }
}

impl MdpModel for TableMdp {
    fn name(&self) -> &str {
        "table"
    }

    fn state_count(&self) -> usize {
        self.transitions.len()
    }

    fn action_count(&self, state: StateId) -> usize {
        self.transitions[state].len()
    }

    fn transition(&self, state: StateId, action: ActionId) -> Transition {
        self.transitions[state][action]
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn initial_state(&self) -> StateId {
        self.initial
    }

    fn reward_bound(&self) -> f64 {
        self.transitions
            .iter()
            .flatten()
            .map(|t| t.reward.abs())
            .fold(0.0, f64::max)
    }

    fn horizon_bound(&self) -> usize {
        self.transitions.len()
    }

    fn max_episode_length(&self) -> usize {
        self.max_episode_length
    }

    fn two_player(&self) -> bool {
        self.two_player
    }
}
