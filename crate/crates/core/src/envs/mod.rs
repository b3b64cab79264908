//! Desk-scale deterministic environments and the descriptor used to build them.

mod cliff;
mod random_mdp;
mod table;
mod tictactoe;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cliff::{CliffGrid, CliffGridParams};

/// Action indices of [`CliffGrid`].
pub mod cliff_actions {
    pub use super::cliff::{DOWN, LEFT, RIGHT, UP};
}
pub use random_mdp::{RandomMdp, RandomMdpParams};
pub use table::{edge, TableMdp};
pub use tictactoe::{Cell, TicTacToe};

use crate::error::Result;
use crate::mdp::MdpModel;

/// Environment descriptor as it appears in experiment configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    CliffGrid(CliffGridParams),
    RandomMdp(RandomMdpParams),
    TicTacToe,
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec::CliffGrid(CliffGridParams::default())
    }
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::CliffGrid(_) => "cliff_grid",
            EnvSpec::RandomMdp(_) => "random_mdp",
            EnvSpec::TicTacToe => "tic_tac_toe",
        }
    }
}

/// Builds a validated model from its descriptor.
pub fn make_env(spec: &EnvSpec) -> Result<Arc<dyn MdpModel>> {
    Ok(match spec {
        EnvSpec::CliffGrid(p) => Arc::new(CliffGrid::new(p.clone())?),
        EnvSpec::RandomMdp(p) => Arc::new(RandomMdp::new(p.clone())?),
        EnvSpec::TicTacToe => Arc::new(TicTacToe::new()),
    })
}

/// Parses a descriptor from JSON, mapping unknown kinds to configuration errors.
pub fn parse_env_spec(value: &serde_json::Value) -> Result<EnvSpec> {
    serde_json::from_value(value.clone())
        .map_err(|e| crate::error::Error::Config(format!("environment: {e}")))
}
