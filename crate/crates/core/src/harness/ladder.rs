use crate::engine::{Rung, SearchConfig};
use crate::error::Result;

use super::episodes::{run_episodes, EpisodeReport};
use super::spec::{AgentSpec, ExperimentSpec};

/// The experiment with one agent per ablation rung, built from `spec.search`.
///
/// The temperature used from `+T` on is the first entry of the sweep's `etas`.
pub fn ablation_spec(spec: &ExperimentSpec) -> ExperimentSpec {
    let eta = spec.sweep.etas.first().copied().unwrap_or(spec.search.eta);
    ExperimentSpec {
        agents: Rung::ALL
            .iter()
            .map(|r| AgentSpec::search(r.label(), &r.config(&spec.search, eta)))
            .collect(),
        ..spec.clone()
    }
}

/// Runs every ablation rung on the same episode seeds.
pub fn run_ablation(spec: &ExperimentSpec) -> Result<EpisodeReport> {
    run_episodes(&ablation_spec(spec))
}

/// Label of one sweep cell.
pub fn sweep_label(config: &SearchConfig) -> String {
    format!(
        "{}_N{}_M{}_eta{}",
        config.algorithm.name(),
        config.particles,
        config.simulations,
        config.eta
    )
}

/// The experiment with one agent per cell of the `(N, M, eta)` grid.
///
/// When `spec.agents` is non-empty, every agent is crossed with the grid.
pub fn sweep_spec(spec: &ExperimentSpec) -> Result<ExperimentSpec> {
    let bases: Vec<(Option<String>, SearchConfig)> = if spec.agents.is_empty() {
        vec![(None, spec.search.clone())]
    } else {
        spec.agents
            .iter()
            .map(|a| Ok((Some(a.label.clone()), a.config(&spec.search)?)))
            .collect::<Result<_>>()?
    };
    let mut agents = Vec::new();
    for (label, base) in &bases {
        for &m in &spec.sweep.simulations {
            for &n in &spec.sweep.particles {
                for &eta in &spec.sweep.etas {
                    let c = SearchConfig {
                        simulations: m,
                        particles: n,
                        eta,
                        ..base.clone()
                    };
                    let cell = sweep_label(&c);
                    let name = match label {
                        Some(l) => format!("{l}/{cell}"),
                        None => cell,
                    };
                    agents.push(AgentSpec::search(name, &c));
                }
            }
        }
    }
    Ok(ExperimentSpec {
        agents,
        ..spec.clone()
    })
}

/// Runs every grid cell on the same episode seeds.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<EpisodeReport> {
    run_episodes(&sweep_spec(spec)?)
}
