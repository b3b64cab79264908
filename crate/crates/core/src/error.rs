use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration names something that does not exist.
    #[error("configuration error: {0}")]
    Config(String),

    /// Parameters are present but violate a precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The model cannot provide what the caller needs (e.g. enumeration).
    #[error("capability error: {0}")]
    Capability(String),

    /// Iterative solver did not reach its tolerance within the iteration cap.
    #[error("solver diverged after {iterations} sweeps (last change {last_change:e})")]
    Divergence { iterations: usize, last_change: f64 },

    /// Importance ratio requested where the proposal assigns zero probability.
    #[error("importance support error: proposal probability is zero (target {target})")]
    ImportanceSupport { target: f64 },

    #[error("index {index} out of range 0..={max}")]
    Range { index: usize, max: usize },

    /// Search finished without a usable root decision.
    #[error("search failure: {0}")]
    SearchFailure(String),

    /// Tree arena would overflow its preallocated capacity.
    #[error("internal error: tree capacity {capacity} exceeded")]
    Capacity { capacity: usize },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than a runtime fault.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Validation(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
