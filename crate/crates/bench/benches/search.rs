//! Search throughput per algorithm and selection cost as the particle count grows.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pmcts::engine::search_with_tree;
use pmcts::{run_search, Algorithm};
use pmcts_bench::{config, random_mdp_fixture, ALGORITHMS};

fn search_per_algorithm(c: &mut Criterion) {
    let (model, evaluator) = random_mdp_fixture();
    let mut group = c.benchmark_group("search");
    for alg in ALGORITHMS {
        let cfg = config(alg, 16, 8);
        group.bench_function(BenchmarkId::from_parameter(alg.name()), |b| {
            b.iter(|| run_search(&model, &evaluator, 0, &cfg).expect("search succeeds"))
        });
    }
    group.finish();
}

fn selection_vs_particles(c: &mut Criterion) {
    let (model, evaluator) = random_mdp_fixture();
    let mut group = c.benchmark_group("selection_time");
    for alg in [Algorithm::Pmcts, Algorithm::PuctVirtualLosses] {
        for n in [1, 4, 16] {
            let cfg = config(alg, 32, n);
            group.bench_with_input(BenchmarkId::new(alg.name(), n), &cfg, |b, cfg| {
                b.iter_custom(|iters| {
                    let mut select_ms = 0.0;
                    for _ in 0..iters {
                        let (r, _) = search_with_tree(&model, &evaluator, 0, cfg).expect("search succeeds");
                        select_ms += r.timings.select_ms;
                    }
                    std::time::Duration::from_secs_f64(select_ms / 1e3)
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, search_per_algorithm, selection_vs_particles);
criterion_main!(benches);
