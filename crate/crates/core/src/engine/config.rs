use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{ActionSelection, BetaSchedule, PuctConstants, VirtualMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GumbelMcts,
    PuctVirtualLosses,
    PuctVirtualMeans,
    SimplePmcts,
    Pmcts,
    RootParallelGumbel,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::GumbelMcts => "gumbel_mcts",
            Algorithm::PuctVirtualLosses => "puct_virtual_losses",
            Algorithm::PuctVirtualMeans => "puct_virtual_means",
            Algorithm::SimplePmcts => "simple_pmcts",
            Algorithm::Pmcts => "pmcts",
            Algorithm::RootParallelGumbel => "root_parallel_gumbel",
        }
    }

    pub fn virtual_mode(&self) -> Option<VirtualMode> {
        match self {
            Algorithm::PuctVirtualLosses => Some(VirtualMode::Losses),
            Algorithm::PuctVirtualMeans => Some(VirtualMode::Means),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Weights renormalized over the particles passing through each node.
    SelfNormalized,
    /// Weighted sum divided by the number of particles through the node.
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafNoise {
    /// One evaluation per unique leaf state per iteration, shared by every
    /// particle that reaches it.
    Shared,
    /// Every particle gets its own independent evaluation of its leaf.
    PerParticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    MeanPolicy,
    MeanQ,
    Vote,
}

/// Every tunable of a single search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Iterations `M`.
    pub simulations: usize,
    /// Particles per iteration `N`.
    pub particles: usize,
    /// Proposal temperature.
    pub eta: f64,
    pub estimator: Estimator,
    /// Multiply weights by target/proposal ratios. Off: tempered sampling without correction.
    pub importance_correction: bool,
    pub retrospective: bool,
    pub dedup: bool,
    pub ess_weighting: bool,
    pub per_depth_weights: bool,
    pub leaf_noise: LeafNoise,
    /// Sequential halving over this many root actions; `None` samples the root like any node.
    pub sh_top_k: Option<usize>,
    pub gumbel_scale: f64,
    pub aggregation: Aggregation,
    /// Final root decision; `None` picks the algorithm's default.
    pub action_selection: Option<ActionSelection>,
    pub seed: u64,
    pub c_visit: f64,
    pub c_scale: f64,
    pub c_base: f64,
    pub c_init: f64,
    /// Logical workers for selection; results do not depend on it.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pmcts,
            simulations: 32,
            particles: 16,
            eta: 1.5,
            estimator: Estimator::SelfNormalized,
            importance_correction: true,
            retrospective: true,
            dedup: true,
            ess_weighting: true,
            per_depth_weights: false,
            leaf_noise: LeafNoise::Shared,
            sh_top_k: None,
            gumbel_scale: 0.0,
            aggregation: Aggregation::MeanPolicy,
            action_selection: None,
            seed: 0,
            c_visit: 50.0,
            c_scale: 0.1,
            c_base: 19652.0,
            c_init: 1.25,
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn beta_schedule(&self) -> BetaSchedule {
        BetaSchedule {
            c_visit: self.c_visit,
            c_scale: self.c_scale,
        }
    }

    pub fn puct_constants(&self) -> PuctConstants {
        PuctConstants {
            c_base: self.c_base,
            c_init: self.c_init,
        }
    }

    pub fn selection_mode(&self) -> ActionSelection {
        self.action_selection.unwrap_or(match self.algorithm {
            Algorithm::PuctVirtualLosses | Algorithm::PuctVirtualMeans => ActionSelection::MaxVisits,
            _ => ActionSelection::ArgmaxImproved,
        })
    }

    /// Arena size `N * M + 1`.
    pub fn capacity(&self) -> usize {
        self.particles * self.simulations + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            return Err(Error::Validation("simulations must be positive".into()));
        }
        if self.particles == 0 {
            return Err(Error::Validation("particles must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Validation("workers must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Validation(format!("eta {} must be positive and finite", self.eta)));
        }
        if self.algorithm == Algorithm::GumbelMcts && self.particles != 1 {
            return Err(Error::Validation("gumbel_mcts is sequential and requires particles = 1".into()));
        }
        if self.retrospective && self.algorithm != Algorithm::Pmcts {
            return Err(Error::Validation(format!(
                "retrospective reweighting requires algorithm pmcts, got {}",
                self.algorithm.name()
            )));
        }
        if let Some(k) = self.sh_top_k {
            if k < 2 || !k.is_power_of_two() {
                return Err(Error::Validation(format!("sh_top_k {k} must be a power of two >= 2")));
            }
        }
        if !(self.c_scale > 0.0 && self.c_visit >= 0.0 && self.c_base > 0.0 && self.c_init >= 0.0) {
            return Err(Error::Validation("search constants out of range".into()));
        }
        if !(self.gumbel_scale >= 0.0 && self.gumbel_scale.is_finite()) {
            return Err(Error::Validation("gumbel_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// A config for `algorithm` with the flags that only make sense for PMCTS cleared.
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        let base = Self {
            algorithm,
            ..Default::default()
        };
        match algorithm {
            Algorithm::Pmcts => base,
            Algorithm::GumbelMcts => Self {
                particles: 1,
                retrospective: false,
                sh_top_k: Some(16),
                ..base
            },
            Algorithm::RootParallelGumbel => Self {
                retrospective: false,
                sh_top_k: Some(16),
                ..base
            },
            _ => Self {
                retrospective: false,
                ..base
            },
        }
    }
}

/// Rungs of the ablation ladder, from Simple PMCTS to full PMCTS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rung {
    S,
    D,
    E,
    T,
    C,
    Pmcts,
}

impl Rung {
    pub const ALL: [Rung; 6] = [Rung::S, Rung::D, Rung::E, Rung::T, Rung::C, Rung::Pmcts];

    pub fn label(&self) -> &'static str {
        match self {
            Rung::S => "S",
            Rung::D => "+D",
            Rung::E => "+E",
            Rung::T => "+T",
            Rung::C => "+C",
            Rung::Pmcts => "PMCTS",
        }
    }

    /// Each rung adds one feature to the previous one. `eta` is the
    /// temperature used from `+T` on.
    pub fn config(&self, base: &SearchConfig, eta: f64) -> SearchConfig {
        let mut c = SearchConfig {
            algorithm: Algorithm::Pmcts,
            eta: 1.0,
            estimator: Estimator::SelfNormalized,
            importance_correction: false,
            retrospective: false,
            dedup: false,
            ess_weighting: false,
            per_depth_weights: false,
            ..base.clone()
        };
        let level = Rung::ALL.iter().position(|r| r == self).unwrap_or(0);
        if level == 0 {
            c.algorithm = Algorithm::SimplePmcts;
        }
        if level >= 1 {
            c.dedup = true;
        }
        if level >= 2 {
            c.ess_weighting = true;
        }
        if level >= 3 {
            c.eta = eta;
        }
        if level >= 4 {
            c.importance_correction = true;
        }
        if level >= 5 {
            c.retrospective = true;
        }
        c
    }
}
