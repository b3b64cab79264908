use serde::{Deserialize, Serialize};

use crate::mdp::ActionId;

/// Diagnostics for one search iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Distinct leaves reached by the batch before merging.
    pub unique_trajectories: usize,
    pub new_nodes: usize,
    /// States sent to the evaluator this iteration.
    pub evaluations: usize,
    /// Backed-up estimate at the root, if the root was updated.
    pub root_estimate: Option<f64>,
    /// Update mass added at the root.
    pub root_mass_increment: f64,
    pub ess_root: f64,
    pub ess_min: f64,
    pub ess_mean: f64,
    /// Nodes left untouched because every particle through them had zero weight.
    pub skipped_nodes: usize,
}

/// Wall-clock time per phase, summed over iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub select_ms: f64,
    pub expand_ms: f64,
    pub backprop_ms: f64,
}

impl PhaseTimings {
    pub fn add(&mut self, other: &PhaseTimings) {
        self.select_ms += other.select_ms;
        self.expand_ms += other.expand_ms;
        self.backprop_ms += other.backprop_ms;
    }
}

/// Outcome of one search. Serialization omits timings, so two results are
/// byte-identical as JSON exactly when the searches were.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub chosen_action: ActionId,
    pub pi_search: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub v_search: f64,
    pub root_visits: Vec<f64>,
    pub root_q: Vec<Option<f64>>,
    pub root_value: f64,
    pub root_mass: f64,
    pub node_count: usize,
    pub iterations: Vec<IterationRecord>,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

impl SearchResult {
    /// Canonical JSON of everything except timings.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("search results always serialize")
    }

    pub fn unique_trajectory_mean(&self) -> f64 {
        mean(self.iterations.iter().map(|r| r.unique_trajectories as f64))
    }

    pub fn ess_root_mean(&self) -> f64 {
        mean(self.iterations.iter().map(|r| r.ess_root))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
