use std::sync::Arc;

use crate::engine::{run_search, SearchConfig, SearchResult};
use crate::error::Result;
use crate::evaluators::Evaluator;
use crate::mdp::{ActionId, MdpModel, StateId};
use crate::oracle::{self, ExactValues};
use crate::policies::argmax;
use crate::rng::{self, tag};

use super::spec::{AgentKind, ExperimentSpec};

/// A move-making agent, resolved from its [`super::AgentSpec`].
#[derive(Debug, Clone)]
pub enum Player {
    Search(SearchConfig),
    Random,
    Perfect(Arc<ExactValues>),
}

/// A move, with the search that produced it if any.
#[derive(Debug, Clone)]
pub struct Move {
    pub action: ActionId,
    pub search: Option<SearchResult>,
}

impl Player {
    /// Picks an action in `state`. `seed` is the per-decision seed; search
    /// agents mix it with their configured seed.
    pub fn act(&self, model: &dyn MdpModel, evaluator: &dyn Evaluator, state: StateId, seed: u64) -> Result<Move> {
        Ok(match self {
            Player::Search(cfg) => {
                let cfg = SearchConfig {
                    seed: rng::mix(cfg.seed, seed),
                    ..cfg.clone()
                };
                let r = run_search(model, evaluator, state, &cfg)?;
                Move {
                    action: r.chosen_action,
                    search: Some(r),
                }
            }
            Player::Random => {
                let n = model.action_count(state);
                let u = rng::unit(rng::key(&[seed, tag::ACTION]));
                Move {
                    action: ((u * n as f64) as usize).min(n - 1),
                    search: None,
                }
            }
            Player::Perfect(values) => Move {
                action: argmax(&values.q[state]),
                search: None,
            },
        })
    }

    pub fn particles(&self) -> usize {
        match self {
            Player::Search(c) => c.particles,
            _ => 0,
        }
    }

    pub fn simulations(&self) -> usize {
        match self {
            Player::Search(c) => c.simulations,
            _ => 0,
        }
    }
}

/// Labelled players for every agent of the experiment.
pub fn build_players(spec: &ExperimentSpec, model: &dyn MdpModel) -> Result<Vec<(String, Player)>> {
    let agents = spec.resolved_agents();
    let needs_oracle = agents.iter().any(|a| a.kind == AgentKind::Perfect);
    let values = if needs_oracle {
        Some(Arc::new(oracle::value_iteration(model, oracle::DEFAULT_TOL)?))
    } else {
        None
    };
    agents
        .iter()
        .map(|a| {
            let p = match a.kind {
                AgentKind::Search => Player::Search(a.config(&spec.search)?),
                AgentKind::Random => Player::Random,
                AgentKind::Perfect => Player::Perfect(values.clone().expect("oracle computed for perfect agents")),
            };
            Ok((a.label.clone(), p))
        })
        .collect()
}
