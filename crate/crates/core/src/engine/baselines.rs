use rayon::prelude::*;

use super::config::{Aggregation, Algorithm, SearchConfig};
use super::result::{PhaseTimings, SearchResult};
use super::{search_failure, search_with_tree, worker_pool};
use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::mdp::{MdpModel, StateId};
use crate::policies::argmax;
use crate::rng::{self, tag};
use crate::tree::SearchTree;

/// Sequential Gumbel-style search: one simulation per iteration, sequential
/// halving at the root, deterministic visit-deficit selection below it.
pub fn run_gumbel_baseline(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    config: &SearchConfig,
) -> Result<SearchResult> {
    if config.algorithm != Algorithm::GumbelMcts {
        return Err(Error::Validation(format!(
            "gumbel baseline called with algorithm {}",
            config.algorithm.name()
        )));
    }
    super::run_search(model, evaluator, root_state, config)
}

/// `N` independent sequential searches with distinct sub-seeds, aggregated at the root.
pub fn run_root_parallel_baseline(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    config: &SearchConfig,
) -> Result<SearchResult> {
    Ok(root_parallel(model, evaluator, root_state, config)?.0)
}

pub(super) fn root_parallel(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    config: &SearchConfig,
) -> Result<(SearchResult, SearchTree)> {
    config.validate()?;
    let sub = |n: usize| SearchConfig {
        algorithm: Algorithm::GumbelMcts,
        particles: 1,
        retrospective: false,
        workers: 1,
        seed: if config.particles == 1 {
            config.seed
        } else {
            rng::key(&[config.seed, tag::TREE, n as u64])
        },
        ..config.clone()
    };
    let one = |n: usize| search_with_tree(model, evaluator, root_state, &sub(n));
    let runs: Vec<(SearchResult, SearchTree)> = match worker_pool(config.workers) {
        Some(pool) => pool.install(|| (0..config.particles).into_par_iter().map(one).collect::<Result<Vec<_>>>())?,
        None => (0..config.particles).map(one).collect::<Result<Vec<_>>>()?,
    };
    let results: Vec<SearchResult> = runs.iter().map(|(r, _)| r.clone()).collect();
    let aggregated = aggregate_root_results(&results, config.aggregation)?;
    let tree = runs.into_iter().next().expect("at least one tree").1;
    Ok((aggregated, tree))
}

/// Combines per-tree root results.
///
/// `pi_search` is always the mean policy. The chosen action is the argmax of
/// the mean policy, of the mean `q` over trees that visited the action, or
/// the most-voted per-tree choice.
pub fn aggregate_root_results(results: &[SearchResult], mode: Aggregation) -> Result<SearchResult> {
    let first = results.first().ok_or_else(|| search_failure("no trees to aggregate"))?;
    if results.len() == 1 {
        return Ok(first.clone());
    }
    let n_actions = first.pi_search.len();
    let k = results.len() as f64;
    let mean = |f: &dyn Fn(&SearchResult) -> &Vec<f64>| -> Vec<f64> {
        (0..n_actions)
            .map(|a| results.iter().map(|r| f(r)[a]).sum::<f64>() / k)
            .collect()
    };
    let pi_search = mean(&|r| &r.pi_search);
    let pi_bar = mean(&|r| &r.pi_bar);
    let root_visits: Vec<f64> = (0..n_actions)
        .map(|a| results.iter().map(|r| r.root_visits[a]).sum())
        .collect();
    let root_q: Vec<Option<f64>> = (0..n_actions)
        .map(|a| {
            let qs: Vec<f64> = results.iter().filter_map(|r| r.root_q[a]).collect();
            (!qs.is_empty()).then(|| qs.iter().sum::<f64>() / qs.len() as f64)
        })
        .collect();
    let chosen_action = match mode {
        Aggregation::MeanPolicy => argmax(&pi_bar),
        Aggregation::MeanQ => argmax(
            &root_q
                .iter()
                .map(|q| q.unwrap_or(f64::NEG_INFINITY))
                .collect::<Vec<_>>(),
        ),
        Aggregation::Vote => {
            let mut votes = vec![0.0; n_actions];
            for r in results {
                votes[r.chosen_action] += 1.0;
            }
            argmax(&votes)
        }
    };
    let mut timings = PhaseTimings::default();
    for r in results {
        timings.add(&r.timings);
    }
    Ok(SearchResult {
        chosen_action,
        pi_search,
        pi_bar,
        v_search: results.iter().map(|r| r.v_search).sum::<f64>() / k,
        root_visits,
        root_q,
        root_value: results.iter().map(|r| r.root_value).sum::<f64>() / k,
        root_mass: results.iter().map(|r| r.root_mass).sum(),
        node_count: results.iter().map(|r| r.node_count).sum(),
        iterations: results.iter().flat_map(|r| r.iterations.iter().cloned()).collect(),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(pi: Vec<f64>, chosen: usize) -> SearchResult {
        SearchResult {
            chosen_action: chosen,
            pi_bar: pi.clone(),
            pi_search: pi,
            v_search: 0.0,
            root_visits: vec![1.0, 1.0],
            root_q: vec![Some(0.1), Some(0.2)],
            root_value: 0.0,
            root_mass: 3.0,
            node_count: 3,
            iterations: Vec::new(),
            timings: PhaseTimings::default(),
        }
    }

    #[test]
    fn mean_policy_example() {
        let agg = aggregate_root_results(
            &[result(vec![0.6, 0.4], 0), result(vec![0.2, 0.8], 1)],
            Aggregation::MeanPolicy,
        )
        .unwrap();
        assert!((agg.pi_search[0] - 0.4).abs() < 1e-15);
        assert!((agg.pi_search[1] - 0.6).abs() < 1e-15);
        assert_eq!(agg.chosen_action, 1);
    }

    #[test]
    fn vote_ties_to_lower_index() {
        let agg = aggregate_root_results(
            &[result(vec![0.6, 0.4], 1), result(vec![0.2, 0.8], 0)],
            Aggregation::Vote,
        )
        .unwrap();
        assert_eq!(agg.chosen_action, 0);
        let q = aggregate_root_results(&[result(vec![0.6, 0.4], 1)], Aggregation::MeanQ).unwrap();
        assert_eq!(q.chosen_action, 1);
    }
}
