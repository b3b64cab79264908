//! Fixtures shared by the criterion benchmarks.

use pmcts::envs::{RandomMdp, RandomMdpParams};
use pmcts::evaluators::{make_noisy_evaluator, TabularEvaluator};
use pmcts::oracle::TabularPolicy;
use pmcts::{Algorithm, SearchConfig};

/// A 200-state random MDP with a noisy evaluator over a random prior.
pub fn random_mdp_fixture() -> (RandomMdp, TabularEvaluator) {
    let model = RandomMdp::new(RandomMdpParams {
        seed: 4,
        state_count: 200,
        action_count: 4,
        terminal_fraction: 0.02,
        max_episode_length: 40,
        ..Default::default()
    })
    .expect("valid parameters");
    let prior = TabularPolicy::random(&model, 1, 0.1);
    let evaluator = make_noisy_evaluator(&model, prior, 0.3, 2).expect("valid evaluator");
    (model, evaluator)
}

/// Search config for `algorithm` with `m` simulations of `n` particles.
pub fn config(algorithm: Algorithm, m: usize, n: usize) -> SearchConfig {
    SearchConfig {
        simulations: m,
        particles: if algorithm == Algorithm::GumbelMcts { 1 } else { n },
        ..SearchConfig::for_algorithm(algorithm)
    }
}

pub const ALGORITHMS: [Algorithm; 6] = [
    Algorithm::GumbelMcts,
    Algorithm::PuctVirtualLosses,
    Algorithm::PuctVirtualMeans,
    Algorithm::SimplePmcts,
    Algorithm::Pmcts,
    Algorithm::RootParallelGumbel,
];
