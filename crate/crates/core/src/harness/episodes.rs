use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::worker_pool;
use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::mdp::MdpModel;
use crate::rng::{self, tag};

use super::agents::{build_players, Player};
use super::spec::ExperimentSpec;
use super::stats::Summary;

/// Column order of the episode CSV.
pub const EPISODE_COLUMNS: [&str; 12] = [
    "agent",
    "env",
    "N",
    "M",
    "seed",
    "episode",
    "return",
    "wallclock_select_ms",
    "wallclock_expand_ms",
    "wallclock_backprop_ms",
    "unique_trajectory_mean",
    "ess_root_mean",
];

/// One row of the episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub agent: String,
    pub env: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub episode: usize,
    /// Undiscounted sum of rewards, plus the evaluator's value if truncated.
    #[serde(rename = "return")]
    pub ret: f64,
    pub wallclock_select_ms: f64,
    pub wallclock_expand_ms: f64,
    pub wallclock_backprop_ms: f64,
    /// Mean over decisions of the per-iteration unique-trajectory count.
    pub unique_trajectory_mean: f64,
    /// Mean over decisions of the per-iteration root ESS.
    pub ess_root_mean: f64,
}

impl EpisodeRecord {
    /// The record with wallclock columns zeroed, for reproducibility checks.
    pub fn without_wallclock(&self) -> Self {
        Self {
            wallclock_select_ms: 0.0,
            wallclock_expand_ms: 0.0,
            wallclock_backprop_ms: 0.0,
            ..self.clone()
        }
    }
}

/// A finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub steps: usize,
    /// The episode hit the length cap and was bootstrapped.
    pub truncated: bool,
}

/// Return statistics of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub label: String,
    pub summary: Summary,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    /// Sorted by agent order, then episode.
    pub records: Vec<EpisodeRecord>,
    pub agents: Vec<AgentStats>,
}

impl EpisodeReport {
    /// Returns of one agent in episode order.
    pub fn returns(&self, label: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.agent == label).map(|r| r.ret).collect()
    }

    pub fn stats(&self, label: &str) -> Option<&AgentStats> {
        self.agents.iter().find(|a| a.label == label)
    }
}

/// Seed of decision `step` of episode `episode`; identical for every agent.
pub fn step_seed(experiment_seed: u64, episode: usize, step: usize) -> u64 {
    rng::key(&[experiment_seed, tag::EPISODE, episode as u64, step as u64])
}

/// Plays one episode from the model's initial state.
#[allow(clippy::too_many_arguments)]
pub fn play_episode(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    player: &Player,
    label: &str,
    env: &str,
    experiment_seed: u64,
    episode: usize,
) -> Result<EpisodeOutcome> {
    let mut state = model.initial_state();
    let mut ret = 0.0;
    let mut record = EpisodeRecord {
        agent: label.to_string(),
        env: env.to_string(),
        n: player.particles(),
        m: player.simulations(),
        seed: experiment_seed,
        episode,
        ret: 0.0,
        wallclock_select_ms: 0.0,
        wallclock_expand_ms: 0.0,
        wallclock_backprop_ms: 0.0,
        unique_trajectory_mean: 0.0,
        ess_root_mean: 0.0,
    };
    let max_len = model.max_episode_length();
    let mut steps = 0;
    let mut searches = 0usize;
    let mut terminated = false;
    while steps < max_len {
        let mv = player.act(model, evaluator, state, step_seed(experiment_seed, episode, steps))?;
        if let Some(r) = &mv.search {
            record.wallclock_select_ms += r.timings.select_ms;
            record.wallclock_expand_ms += r.timings.expand_ms;
            record.wallclock_backprop_ms += r.timings.backprop_ms;
            record.unique_trajectory_mean += r.unique_trajectory_mean();
            record.ess_root_mean += r.ess_root_mean();
            searches += 1;
        }
        let t = model.transition(state, mv.action);
        ret += t.reward;
        steps += 1;
        if t.terminal {
            terminated = true;
            break;
        }
        state = t.next_state;
    }
    if !terminated {
        let draw = rng::key(&[experiment_seed, tag::EPISODE, episode as u64, u64::MAX]);
        ret += evaluator.evaluate(state, draw)?.value;
    }
    if searches > 0 {
        record.unique_trajectory_mean /= searches as f64;
        record.ess_root_mean /= searches as f64;
    }
    record.ret = ret;
    Ok(EpisodeOutcome {
        record,
        steps,
        truncated: !terminated,
    })
}

/// Runs `spec.episodes` episodes per agent on a single-agent environment.
///
/// Every agent sees the same per-episode seeds, so returns can be compared pairwise.
pub fn run_episodes(spec: &ExperimentSpec) -> Result<EpisodeReport> {
    spec.validate()?;
    let model = spec.build_env()?;
    if model.two_player() {
        return Err(Error::Validation(format!(
            "episodes need a single-agent environment, {} is two-player",
            model.name()
        )));
    }
    let evaluator = spec.build_evaluator(&model)?;
    let players = build_players(spec, model.as_ref())?;
    let env = spec.env.name();
    let jobs: Vec<(usize, usize)> = (0..players.len())
        .flat_map(|a| (0..spec.episodes).map(move |e| (a, e)))
        .collect();
    let run = |&(a, e): &(usize, usize)| {
        let (label, player) = &players[a];
        play_episode(model.as_ref(), evaluator.as_ref(), player, label, env, spec.seed, e)
    };
    let outcomes: Vec<EpisodeOutcome> = match worker_pool(spec.workers) {
        Some(pool) => pool.install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?,
        None => jobs.iter().map(run).collect::<Result<Vec<_>>>()?,
    };
    let agents = players
        .iter()
        .map(|(label, _)| {
            let mine: Vec<&EpisodeOutcome> = outcomes.iter().filter(|o| &o.record.agent == label).collect();
            let returns: Vec<f64> = mine.iter().map(|o| o.record.ret).collect();
            let truncated = mine.iter().filter(|o| o.truncated).count();
            if truncated > 0 {
                log::warn!("{label}: {truncated} episodes truncated at the length cap");
            }
            AgentStats {
                label: label.clone(),
                summary: Summary::of(&returns),
                truncated,
            }
        })
        .collect();
    Ok(EpisodeReport {
        records: outcomes.into_iter().map(|o| o.record).collect(),
        agents,
    })
}
