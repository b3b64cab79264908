use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, StateId, Transition};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMdpParams {
    pub seed: u64,
    pub state_count: usize,
    pub action_count: usize,
    pub reward_scale: f64,
    pub terminal_fraction: f64,
    pub discount: f64,
    pub max_episode_length: usize,
}

impl Default for RandomMdpParams {
    fn default() -> Self {
        Self {
            seed: 0,
            state_count: 20,
            action_count: 3,
            reward_scale: 1.0,
            terminal_fraction: 0.1,
            discount: 0.9,
            max_episode_length: 20,
        }
    }
}

/// Deterministic random MDP whose transitions are pure functions of
/// `(seed, state, action)`; nothing is tabulated.
///
/// One "backbone" action per state leads non-terminally to the next state
/// index, so every state is reachable from state 0 within `state_count`
/// steps. All other edges lead to a hashed successor and terminate with
/// probability `terminal_fraction`.
#[derive(Debug, Clone)]
pub struct RandomMdp {
    p: RandomMdpParams,
}

impl RandomMdp {
    pub fn new(p: RandomMdpParams) -> Result<Self> {
        if p.state_count == 0 || p.action_count == 0 {
            return Err(Error::Validation(
                "random_mdp: state_count and action_count must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&p.terminal_fraction) {
            return Err(Error::Validation(format!(
                "random_mdp: terminal_fraction {} outside [0, 1)",
                p.terminal_fraction
            )));
        }
        if !(p.discount > 0.0 && p.discount <= 1.0) {
            return Err(Error::Validation(format!(
                "random_mdp: discount {} outside (0, 1]",
                p.discount
            )));
        }
        if !(p.reward_scale >= 0.0 && p.reward_scale.is_finite()) {
            return Err(Error::Validation("random_mdp: reward_scale must be finite and >= 0".into()));
        }
        if p.max_episode_length == 0 {
            return Err(Error::Validation("random_mdp: max_episode_length must be positive".into()));
        }
        Ok(Self { p })
    }

    pub fn params(&self) -> &RandomMdpParams {
        &self.p
    }

    pub fn backbone_action(&self, state: StateId) -> ActionId {
        (rng::splitmix64(rng::key(&[self.p.seed, tag::ENV, state as u64])) % self.p.action_count as u64)
            as ActionId
    }
}

impl MdpModel for RandomMdp {
    fn name(&self) -> &str {
        "random_mdp"
    }

    fn state_count(&self) -> usize {
        self.p.state_count
    }

    fn action_count(&self, _state: StateId) -> usize {
        self.p.action_count
    }

    fn transition(&self, state: StateId, action: ActionId) -> Transition {
        let k = rng::key(&[self.p.seed, tag::ENV, state as u64, action as u64]);
        let reward = self.p.reward_scale * (2.0 * rng::unit(rng::mix(k, 1)) - 1.0);
        if action == self.backbone_action(state) {
            return Transition {
                next_state: (state + 1) % self.p.state_count,
                reward,
                terminal: false,
            };
        }
        let next_state = (rng::splitmix64(rng::mix(k, 2)) % self.p.state_count as u64) as StateId;
        let terminal = rng::unit(rng::mix(k, 3)) < self.p.terminal_fraction;
        Transition {
            next_state,
            reward,
            terminal,
        }
    }

    fn discount(&self) -> f64 {
        self.p.discount
    }

    fn initial_state(&self) -> StateId {
        0
    }

    fn reward_bound(&self) -> f64 {
        self.p.reward_scale
    }

    fn horizon_bound(&self) -> usize {
        self.p.state_count
    }

    fn max_episode_length(&self) -> usize {
        self.p.max_episode_length
    }
}
