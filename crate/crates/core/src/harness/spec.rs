use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::engine::SearchConfig;
use crate::envs::{make_env, EnvSpec};
use crate::error::{Error, Result};
use crate::evaluators::{
    make_biased_evaluator, make_exact_evaluator, make_noisy_evaluator, Evaluator, EvaluatorKind, RolloutEvaluator,
};
use crate::mdp::MdpModel;
use crate::oracle::{self, TabularPolicy};

/// Prior policy handed to the evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform,
    /// Random full-support rows, `p(a) ∝ Exp(1) + floor`.
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    /// One hashed action per state carries `mass`.
    Dominant {
        #[serde(default)]
        seed: u64,
        mass: f64,
    },
    /// Softmax of the optimal action values.
    SoftmaxQ { temperature: f64 },
}

fn default_floor() -> f64 {
    0.1
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Uniform
    }
}

impl PriorSpec {
    pub fn build(&self, model: &dyn MdpModel) -> Result<TabularPolicy> {
        let p = match self {
            PriorSpec::Uniform => TabularPolicy::uniform(model),
            PriorSpec::Random { seed, floor } => TabularPolicy::random(model, *seed, *floor),
            PriorSpec::Dominant { seed, mass } => {
                if !(0.0..=1.0).contains(mass) {
                    return Err(Error::Validation(format!("dominant prior mass {mass} outside [0, 1]")));
                }
                TabularPolicy::dominant(model, *seed, *mass)
            }
            PriorSpec::SoftmaxQ { temperature } => {
                if *temperature == 0.0 || !temperature.is_finite() {
                    return Err(Error::Validation(format!("softmax temperature {temperature} must be finite and nonzero")));
                }
                let values = oracle::value_iteration(model, oracle::DEFAULT_TOL)?;
                TabularPolicy::softmax(&values, *temperature)
            }
        };
        p.validate(model)?;
        Ok(p)
    }
}

/// Evaluator descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorSpec {
    pub kind: EvaluatorKind,
    /// Noise scale of the noisy evaluator.
    pub sigma: f64,
    /// Offset scale of the biased evaluator.
    pub bias_scale: f64,
    pub prior: PriorSpec,
    pub seed: u64,
    pub rollouts: usize,
    pub max_rollout_depth: usize,
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        Self {
            kind: EvaluatorKind::Exact,
            sigma: 0.0,
            bias_scale: 0.0,
            prior: PriorSpec::Uniform,
            seed: 0,
            rollouts: 1,
            max_rollout_depth: 30,
        }
    }
}

impl EvaluatorSpec {
    pub fn build(&self, model: &Arc<dyn MdpModel>) -> Result<Arc<dyn Evaluator>> {
        let prior = self.prior.build(model.as_ref())?;
        Ok(match self.kind {
            EvaluatorKind::Exact => Arc::new(make_exact_evaluator(model.as_ref(), prior)?),
            EvaluatorKind::NoisyUnbiased => Arc::new(make_noisy_evaluator(model.as_ref(), prior, self.sigma, self.seed)?),
            EvaluatorKind::DeterministicBiased => {
                Arc::new(make_biased_evaluator(model.as_ref(), prior, self.bias_scale, self.seed)?)
            }
            EvaluatorKind::Rollout => Arc::new(RolloutEvaluator::new(
                model.clone(),
                prior,
                self.rollouts,
                self.max_rollout_depth,
                self.seed,
            )?),
        })
    }
}

/// How an agent picks its moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Runs a search with the experiment's search config plus the agent's overrides.
    #[default]
    Search,
    /// Uniformly random legal moves.
    Random,
    /// Greedy with respect to exact optimal action values.
    Perfect,
}

/// One competitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub label: String,
    #[serde(default)]
    pub kind: AgentKind,
    /// Search config keys that replace the experiment's defaults.
    #[serde(default)]
    pub search: Map<String, Value>,
}

impl AgentSpec {
    pub fn search(label: impl Into<String>, config: &SearchConfig) -> Self {
        let Value::Object(search) = serde_json::to_value(config).expect("search configs serialize") else {
            unreachable!("search configs serialize to objects")
        };
        Self {
            label: label.into(),
            kind: AgentKind::Search,
            search,
        }
    }

    /// The agent's search config: `base` with this agent's keys replaced.
    pub fn config(&self, base: &SearchConfig) -> Result<SearchConfig> {
        let Value::Object(mut merged) = serde_json::to_value(base)? else {
            unreachable!("search configs serialize to objects")
        };
        for (k, v) in &self.search {
            merged.insert(k.clone(), v.clone());
        }
        let c: SearchConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| Error::Config(format!("agent {}: {e}", self.label)))?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    MeanReturn,
    BayesElo,
    WinRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Grid of the parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub particles: Vec<usize>,
    pub simulations: Vec<usize>,
    pub etas: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            particles: vec![1, 4, 16],
            simulations: vec![8, 32],
            etas: vec![1.5],
        }
    }
}

/// Opening book parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BookSpec {
    pub plies: usize,
    /// Accepted range of oracle values scaled to `[-1, 1]`.
    pub window: [f64; 2],
    pub count: usize,
}

impl Default for BookSpec {
    fn default() -> Self {
        Self {
            plies: 2,
            window: [-0.3, 0.3],
            count: 10,
        }
    }
}

/// A complete experiment, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub env: EnvSpec,
    pub evaluator: EvaluatorSpec,
    /// Search config shared by every agent.
    pub search: SearchConfig,
    /// Competitors. Empty means one search agent labelled by its algorithm.
    pub agents: Vec<AgentSpec>,
    /// Episodes per agent, or openings per pairing in tournaments.
    pub episodes: usize,
    pub metric: Metric,
    pub seed: u64,
    /// Episodes or games run concurrently.
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub sweep: SweepSpec,
    pub book: BookSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            env: EnvSpec::default(),
            evaluator: EvaluatorSpec::default(),
            search: SearchConfig::default(),
            agents: Vec::new(),
            episodes: 16,
            metric: Metric::MeanReturn,
            seed: 0,
            workers: 1,
            output: None,
            format: OutputFormat::Csv,
            sweep: SweepSpec::default(),
            book: BookSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// The agent list with the single-agent default filled in.
    pub fn resolved_agents(&self) -> Vec<AgentSpec> {
        if self.agents.is_empty() {
            vec![AgentSpec {
                label: self.search.algorithm.name().to_string(),
                kind: AgentKind::Search,
                search: Map::new(),
            }]
        } else {
            self.agents.clone()
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        let agents = self.resolved_agents();
        let mut labels: Vec<&str> = agents.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("agent labels must be unique".into()));
        }
        for a in &agents {
            if a.kind == AgentKind::Search {
                a.config(&self.search)?;
            }
        }
        if self.episodes == 0 {
            return Err(Error::Validation("episodes must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Validation("workers must be positive".into()));
        }
        if self.metric == Metric::BayesElo {
            if agents.len() < 2 {
                return Err(Error::Validation("bayes_elo needs at least two agents".into()));
            }
            if !make_env(&self.env)?.two_player() {
                return Err(Error::Validation("bayes_elo needs a two-player environment".into()));
            }
        }
        let [lo, hi] = self.book.window;
        if !(lo <= hi) {
            return Err(Error::Validation(format!("book window [{lo}, {hi}] is empty")));
        }
        if self.sweep.particles.is_empty() || self.sweep.simulations.is_empty() || self.sweep.etas.is_empty() {
            return Err(Error::Validation("sweep grid axes must be non-empty".into()));
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<Arc<dyn MdpModel>> {
        make_env(&self.env)
    }

    pub fn build_evaluator(&self, model: &Arc<dyn MdpModel>) -> Result<Arc<dyn Evaluator>> {
        self.evaluator.build(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_uses_defaults() {
        let s = ExperimentSpec::from_json("{}").unwrap();
        assert_eq!(s, ExperimentSpec::default());
        s.validate().unwrap();
        assert_eq!(s.resolved_agents()[0].label, "pmcts");
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ExperimentSpec::from_json(r#"{"serch": {}}"#).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("serch"));
    }

    #[test]
    fn agent_overrides_merge_over_base() {
        let a: AgentSpec = serde_json::from_str(r#"{"label": "n16", "search": {"particles": 16}}"#).unwrap();
        let base = SearchConfig {
            simulations: 7,
            ..Default::default()
        };
        let c = a.config(&base).unwrap();
        assert_eq!((c.particles, c.simulations), (16, 7));
        let bad: AgentSpec = serde_json::from_str(r#"{"label": "x", "search": {"partcles": 1}}"#).unwrap();
        assert!(bad.config(&base).unwrap_err().is_config());
    }

    #[test]
    fn bayes_elo_requires_two_player_env() {
        let mut s = ExperimentSpec {
            metric: Metric::BayesElo,
            agents: vec![AgentSpec::search("a", &SearchConfig::default()), AgentSpec::search("b", &SearchConfig::default())],
            ..Default::default()
        };
        assert!(s.validate().is_err());
        s.env = EnvSpec::TicTacToe;
        s.validate().unwrap();
        s.agents.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn every_evaluator_kind_builds() {
        let s = ExperimentSpec::default();
        let model = s.build_env().unwrap();
        for kind in [
            EvaluatorKind::Exact,
            EvaluatorKind::NoisyUnbiased,
            EvaluatorKind::DeterministicBiased,
            EvaluatorKind::Rollout,
        ] {
            for prior in [
                PriorSpec::Uniform,
                PriorSpec::Random { seed: 1, floor: 0.1 },
                PriorSpec::Dominant { seed: 1, mass: 0.7 },
                PriorSpec::SoftmaxQ { temperature: 0.5 },
            ] {
                let spec = EvaluatorSpec {
                    kind,
                    sigma: 0.1,
                    bias_scale: 0.1,
                    prior,
                    ..Default::default()
                };
                let ev = spec.build(&model).unwrap();
                assert_eq!(ev.kind(), kind);
            }
        }
    }
}
