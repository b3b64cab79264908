//! Search algorithms: sequential Gumbel-style MCTS, PUCT with virtual
//! visits, Simple PMCTS, full PMCTS and root-parallel aggregation.
//!
//! Every algorithm runs the same synchronous loop. Each iteration selects a
//! batch of particles from a read-only tree, expands their leaves with one
//! evaluator call, finalizes weights and backpropagates in ascending node
//! order. Results are bit-identical for any worker count.

mod baselines;
mod config;
mod particles;
mod result;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

pub use baselines::{aggregate_root_results, run_gumbel_baseline, run_root_parallel_baseline};
pub use config::{Aggregation, Algorithm, Estimator, LeafNoise, Rung, SearchConfig};
pub use particles::{
    backprop_simple, backprop_weighted, dedup_merge, expand_batch, retrospective_reweight, root_ess, select_particles,
    BackpropStats, ExpansionStats, Particle, ParticleBatch, SelectionRule,
};
pub use result::{IterationRecord, PhaseTimings, SearchResult};

use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::mdp::{ActionId, MdpModel, StateId};
use crate::policies::{improved_policy_at, root_action_selection, sh_schedule, BetaSchedule, ShSchedule};
use crate::rng::{self, tag};
use crate::tree::{completed_q, init_tree, SearchTree, ROOT};

/// Thread pools are expensive to build, so one is kept per worker count.
pub fn worker_pool(workers: usize) -> Option<Arc<rayon::ThreadPool>> {
    if workers <= 1 {
        return None;
    }
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let pools = POOLS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = pools.lock().unwrap_or_else(|e| e.into_inner());
    Some(
        guard
            .entry(workers)
            .or_insert_with(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .expect("thread pool construction"),
                )
            })
            .clone(),
    )
}

/// Runs one search from `root_state`.
pub fn run_search(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    config: &SearchConfig,
) -> Result<SearchResult> {
    Ok(search_with_tree(model, evaluator, root_state, config)?.0)
}

/// Like [`run_search`], also returning the final tree (the first tree for root-parallel search).
pub fn search_with_tree(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    config: &SearchConfig,
) -> Result<(SearchResult, SearchTree)> {
    config.validate()?;
    if config.algorithm == Algorithm::RootParallelGumbel {
        return baselines::root_parallel(model, evaluator, root_state, config);
    }
    let pool = worker_pool(config.workers);
    let schedule = config.beta_schedule();
    let mut tree = init_tree(
        model,
        evaluator,
        root_state,
        config.capacity(),
        rng::key(&[config.seed, tag::ROOT_EVAL]),
    )?;
    let mut root_sh = RootHalving::new(&tree, config)?;
    let mut records = Vec::with_capacity(config.simulations);
    let mut timings = PhaseTimings::default();
    let weighted = config.algorithm == Algorithm::Pmcts;

    for iteration in 0..config.simulations {
        let t0 = Instant::now();
        let forced = match root_sh.as_mut() {
            Some(sh) => sh.assign(&tree, config.particles, &schedule)?,
            None => Vec::new(),
        };
        let mut batch = select_particles(&tree, config, iteration, &forced, pool.as_deref())?;
        let t1 = Instant::now();
        let unique_trajectories = batch.unique_trajectories();
        let expansion = expand_batch(&mut tree, model, evaluator, &mut batch, config)?;
        if weighted && config.retrospective {
            retrospective_reweight(&tree, &mut batch, &schedule)?;
        }
        if weighted && config.dedup {
            dedup_merge(&mut batch);
        }
        let t2 = Instant::now();
        let stats = if weighted {
            backprop_weighted(&mut tree, &batch, config, pool.as_deref())?
        } else {
            backprop_simple(&mut tree, &batch, pool.as_deref())?
        };
        let t3 = Instant::now();
        timings.select_ms += (t1 - t0).as_secs_f64() * 1e3;
        timings.expand_ms += (t2 - t1).as_secs_f64() * 1e3;
        timings.backprop_ms += (t3 - t2).as_secs_f64() * 1e3;
        records.push(IterationRecord {
            iteration,
            unique_trajectories,
            new_nodes: expansion.new_nodes,
            evaluations: expansion.evaluations,
            root_estimate: stats.root_estimate,
            root_mass_increment: stats.root_mass_increment,
            ess_root: stats.ess_root,
            ess_min: stats.ess_min,
            ess_mean: stats.ess_mean,
            skipped_nodes: stats.skipped_nodes,
        });
    }
    let result = finish(&tree, config, records, timings)?;
    Ok((result, tree))
}

fn finish(
    tree: &SearchTree,
    config: &SearchConfig,
    iterations: Vec<IterationRecord>,
    timings: PhaseTimings,
) -> Result<SearchResult> {
    let u = rng::unit(rng::key(&[config.seed, tag::ACTION]));
    let d = root_action_selection(tree, &config.beta_schedule(), config.selection_mode(), u)?;
    let root = tree.node(ROOT);
    Ok(SearchResult {
        chosen_action: d.action,
        pi_search: d.pi_search,
        pi_bar: d.pi_bar,
        v_search: d.v_search,
        root_visits: tree.child_masses(ROOT),
        root_q: tree.q_values(ROOT),
        root_value: root.value,
        root_mass: root.visit_mass,
        node_count: tree.len(),
        iterations,
        timings,
    })
}

/// Largest usable sequential-halving width, or `None` if halving cannot run.
pub fn effective_top_k(requested: usize, actions: usize, budget: usize) -> Option<usize> {
    let mut k = requested.min(actions);
    if k < 2 {
        return None;
    }
    k = 1 << (usize::BITS - 1 - k.leading_zeros());
    while k >= 2 && budget < k * k.trailing_zeros() as usize {
        k /= 2;
    }
    (k >= 2).then_some(k)
}

/// Root action assignment by sequential halving over `M * N` simulations.
struct RootHalving {
    schedule: ShSchedule,
    phase: usize,
    survivors: Vec<ActionId>,
    queue: std::collections::VecDeque<ActionId>,
    gumbel: Vec<f64>,
    leftover_cursor: usize,
}

impl RootHalving {
    fn new(tree: &SearchTree, config: &SearchConfig) -> Result<Option<Self>> {
        let Some(requested) = config.sh_top_k else {
            return Ok(None);
        };
        let root = tree.node(ROOT);
        let n = root.children.len();
        let budget = config.simulations * config.particles;
        let Some(k) = effective_top_k(requested, n, budget) else {
            return Ok(None);
        };
        let schedule = sh_schedule(config.simulations, config.particles, k)?;
        let gumbel: Vec<f64> = (0..n)
            .map(|a| {
                if config.gumbel_scale == 0.0 {
                    0.0
                } else {
                    let u = rng::open_unit(rng::key(&[config.seed, tag::GUMBEL, a as u64]));
                    config.gumbel_scale * -(-u.ln()).ln()
                }
            })
            .collect();
        let scores: Vec<f64> = (0..n).map(|a| gumbel[a] + root.prior[a].ln()).collect();
        let survivors = top_actions(&scores, k);
        Ok(Some(Self {
            schedule,
            phase: 0,
            survivors,
            queue: Default::default(),
            gumbel,
            leftover_cursor: 0,
        }))
    }

    fn halve(&mut self, tree: &SearchTree, schedule: &BetaSchedule) {
        let root = tree.node(ROOT);
        let q = completed_q(tree, ROOT, root.prior_value);
        let beta = schedule.beta_at(tree, ROOT);
        let scores: Vec<f64> = (0..root.children.len())
            .map(|a| {
                if self.survivors.contains(&a) {
                    self.gumbel[a] + root.prior[a].ln() + beta * q[a]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let keep = (self.survivors.len() / 2).max(1);
        self.survivors = top_actions(&scores, keep);
    }

    fn next(&mut self, tree: &SearchTree, schedule: &BetaSchedule) -> ActionId {
        if self.queue.is_empty() && self.phase < self.schedule.phases.len() {
            if self.phase > 0 {
                self.halve(tree, schedule);
            }
            let per = self.schedule.phases[self.phase].per_action;
            for _ in 0..per {
                self.queue.extend(self.survivors.iter().copied());
            }
            self.phase += 1;
        }
        match self.queue.pop_front() {
            Some(a) => a,
            None => {
                let a = self.survivors[self.leftover_cursor % self.survivors.len()];
                self.leftover_cursor += 1;
                a
            }
        }
    }

    fn assign(&mut self, tree: &SearchTree, n: usize, schedule: &BetaSchedule) -> Result<Vec<Option<ActionId>>> {
        Ok((0..n).map(|_| Some(self.next(tree, schedule))).collect())
    }
}

/// Indices of the `k` highest scores in ascending index order, ties to the lower index.
fn top_actions(scores: &[f64], k: usize) -> Vec<ActionId> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut top: Vec<usize> = idx.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// Improved policy at the root of a finished tree.
pub fn root_policy(tree: &SearchTree, config: &SearchConfig) -> Result<Vec<f64>> {
    improved_policy_at(tree, ROOT, &config.beta_schedule())
}

pub(crate) fn search_failure(msg: impl Into<String>) -> Error {
    Error::SearchFailure(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_rounding() {
        assert_eq!(effective_top_k(16, 4, 100), Some(4));
        assert_eq!(effective_top_k(16, 6, 100), Some(4));
        assert_eq!(effective_top_k(16, 9, 100), Some(8));
        assert_eq!(effective_top_k(16, 9, 10), Some(4));
        assert_eq!(effective_top_k(16, 1, 100), None);
        assert_eq!(effective_top_k(16, 3, 1), None);
    }

    #[test]
    fn top_actions_ties_to_lower_index() {
        assert_eq!(top_actions(&[1.0, 3.0, 3.0, 0.0], 2), vec![1, 2]);
        assert_eq!(top_actions(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    }
}
