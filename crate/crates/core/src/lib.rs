//! Parallel Monte Carlo tree search with particle-based selection.
//!
//! The crate is organised bottom-up: [`mdp`] and [`envs`] define models,
//! [`oracle`] computes exact values for them, [`evaluators`] provide prior and
//! value estimates, [`tree`] and [`policies`] are the building blocks of the
//! search algorithms in [`engine`], and [`harness`] runs experiments.

pub mod engine;
pub mod envs;
pub mod error;
pub mod evaluators;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod tree;

pub use engine::{run_search, Algorithm, SearchConfig, SearchResult};
pub use error::{Error, Result};
pub use mdp::{ActionId, MdpModel, StateId, Trajectory, Transition};
