//! Harness integration tests: episodes, ladders, sweeps, tournaments,
//! opening books and rating fits.

use std::collections::HashMap;

use pmcts::engine::{Algorithm, Rung, SearchConfig};
use pmcts::envs::{Cell, CliffGridParams, EnvSpec, TicTacToe};
use pmcts::harness::{
    ablation_spec, fit_bayes_elo, generate_opening_book, ply_layer, run_episodes, run_tournament,
    run_tournament_with_openings, scale_to_unit, sweep_spec, write_results, AgentKind, AgentSpec, EpisodeReport,
    ExperimentSpec, OutputFormat, Summary, WinMatrix, EPISODE_COLUMNS,
};
use pmcts::oracle;

fn agent(label: &str, kind: AgentKind) -> AgentSpec {
    AgentSpec {
        label: label.into(),
        kind,
        search: Default::default(),
    }
}

fn small_search() -> SearchConfig {
    SearchConfig {
        simulations: 4,
        particles: 2,
        ..Default::default()
    }
}

fn cliff_spec(episodes: usize) -> ExperimentSpec {
    ExperimentSpec {
        episodes,
        search: small_search(),
        ..Default::default()
    }
}

fn tictactoe_spec(agents: Vec<AgentSpec>) -> ExperimentSpec {
    ExperimentSpec {
        env: EnvSpec::TicTacToe,
        search: small_search(),
        agents,
        ..Default::default()
    }
}

fn csv_bytes(report: &EpisodeReport) -> Vec<u8> {
    let recs: Vec<_> = report.records.iter().map(|r| r.without_wallclock()).collect();
    let mut out = Vec::new();
    write_results(&recs, OutputFormat::Csv, &mut out).unwrap();
    out
}

/// Minimax value of a board for the player to move: +1 win, 0 draw, -1 loss.
fn minimax(board: [Cell; 9], memo: &mut HashMap<[Cell; 9], i32>) -> i32 {
    if let Some(&v) = memo.get(&board) {
        return v;
    }
    let mover = TicTacToe::to_move(&board);
    let mut best = if board.iter().all(|&c| c != Cell::Empty) { 0 } else { -1 };
    for i in 0..9 {
        if board[i] != Cell::Empty {
            continue;
        }
        let mut next = board;
        next[i] = mover;
        let v = if TicTacToe::winner(&next) == Some(mover) {
            1
        } else if next.iter().all(|&c| c != Cell::Empty) {
            0
        } else {
            -minimax(next, memo)
        };
        best = best.max(v);
    }
    memo.insert(board, best);
    best
}

#[test]
fn perfect_player_never_loses_to_random() {
    let mut spec = tictactoe_spec(vec![agent("perfect", AgentKind::Perfect), agent("random", AgentKind::Random)]);
    spec.book.count = 30;
    let report = run_tournament(&spec).unwrap();
    let r = report.matrix.results[0][1];
    assert_eq!(r.total_losses(), 0, "{r:?}");
    assert!(r.total_wins() > 0);
}

#[test]
fn two_agents_on_ten_openings_play_twenty_games() {
    let spec = tictactoe_spec(vec![agent("a", AgentKind::Random), agent("b", AgentKind::Search)]);
    let report = run_tournament(&spec).unwrap();
    assert_eq!(report.openings.len(), 10);
    assert_eq!(report.matrix.total_games(), 20);
    assert!(report.matrix.is_consistent());
}

#[test]
fn identical_agents_give_mirrored_results() {
    let spec = tictactoe_spec(vec![agent("a", AgentKind::Search), agent("b", AgentKind::Search)]);
    let openings: Vec<usize> = ply_layer(&TicTacToe::new(), 2).into_iter().take(12).collect();
    let r = run_tournament_with_openings(&spec, &openings).unwrap().matrix.results[0][1];
    assert_eq!(r.wins[0], r.losses[1]);
    assert_eq!(r.wins[1], r.losses[0]);
    assert_eq!(r.draws[0], r.draws[1]);
}

#[test]
fn balanced_book_positions_are_draws() {
    let model = TicTacToe::new();
    let values = oracle::value_iteration(&model, oracle::DEFAULT_TOL).unwrap();
    let scaled = scale_to_unit(&values.v);
    let book = generate_opening_book(&model, &scaled, 2, [-0.3, 0.3], 10, 7).unwrap();
    assert_eq!(book.states.len(), 10);
    assert!(!book.partial);
    let mut memo = HashMap::new();
    for &s in &book.states {
        let board = TicTacToe::decode(s);
        assert_eq!(board.iter().filter(|&&c| c != Cell::Empty).count(), 2);
        assert_eq!(minimax(board, &mut memo), 0, "state {s}");
    }
}

#[test]
fn book_is_partial_when_too_few_positions_qualify() {
    let model = TicTacToe::new();
    let values = oracle::value_iteration(&model, oracle::DEFAULT_TOL).unwrap();
    let scaled = scale_to_unit(&values.v);
    let layer = ply_layer(&model, 2);
    let book = generate_opening_book(&model, &scaled, 2, [-1.0, 1.0], 10_000, 0).unwrap();
    assert!(book.partial);
    assert_eq!(book.states.len(), layer.len());
    assert_eq!(book.requested, 10_000);

    let mut memo = HashMap::new();
    let draws = layer.iter().filter(|&&s| minimax(TicTacToe::decode(s), &mut memo) == 0).count();
    let balanced = generate_opening_book(&model, &scaled, 2, [-0.3, 0.3], 10_000, 0).unwrap();
    assert_eq!(balanced.states.len(), draws);
}

#[test]
fn sweep_with_three_agents_and_two_budgets() {
    let mut spec = cliff_spec(10);
    spec.agents = vec![
        AgentSpec::search("pmcts", &small_search()),
        AgentSpec::search("simple", &SearchConfig::for_algorithm(Algorithm::SimplePmcts)),
        AgentSpec::search("gumbel", &SearchConfig::for_algorithm(Algorithm::GumbelMcts)),
    ];
    spec.sweep.particles = vec![1];
    spec.sweep.simulations = vec![4, 8];
    let report = run_episodes(&sweep_spec(&spec).unwrap()).unwrap();
    assert_eq!(report.records.len(), 60);
    assert_eq!(report.agents.len(), 6);
    let text = String::from_utf8(csv_bytes(&report)).unwrap();
    assert_eq!(text.lines().next().unwrap(), EPISODE_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn episode_csv_is_reproducible() {
    let spec = cliff_spec(8);
    let a = csv_bytes(&run_episodes(&spec).unwrap());
    let b = csv_bytes(&run_episodes(&ExperimentSpec { workers: 4, ..spec.clone() }).unwrap());
    assert_eq!(a, b);
    let c = csv_bytes(&run_episodes(&ExperimentSpec { seed: 1, ..spec }).unwrap());
    assert_ne!(a, c);
}

#[test]
fn summary_matches_records() {
    let spec = ExperimentSpec {
        env: EnvSpec::CliffGrid(CliffGridParams {
            step_reward: -0.1,
            ..Default::default()
        }),
        ..cliff_spec(12)
    };
    let report = run_episodes(&spec).unwrap();
    let label = &report.agents[0].label;
    let returns: Vec<f64> = report.records.iter().map(|r| r.ret).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let s = report.stats(label).unwrap().summary;
    assert!((s.mean - mean).abs() < 1e-12);
    assert!((s.sem - (var / n).sqrt()).abs() < 1e-12);
    assert_eq!(s, Summary::of(&report.returns(label)));
}

#[test]
fn always_reaching_the_goal_gives_zero_sem() {
    let mut spec = cliff_spec(10);
    spec.agents = vec![agent("perfect", AgentKind::Perfect)];
    let report = run_episodes(&spec).unwrap();
    let s = report.agents[0].summary;
    assert_eq!(s.mean, 1.0);
    assert_eq!(s.sem, 0.0);
}

#[test]
fn ablation_ladder_has_six_rungs() {
    let mut spec = cliff_spec(100);
    spec.sweep.etas = vec![1.0];
    let report = run_episodes(&ablation_spec(&spec)).unwrap();
    assert_eq!(report.records.len(), 600);
    let labels: Vec<&str> = report.agents.iter().map(|a| a.label.as_str()).collect();
    assert_eq!(labels, Rung::ALL.iter().map(|r| r.label()).collect::<Vec<_>>());
    // at unit temperature the tempered rung samples exactly like its predecessor
    assert_eq!(report.returns("+T"), report.returns("+E"));
}

#[test]
fn sweep_grid_has_one_agent_per_cell() {
    let mut spec = cliff_spec(5);
    spec.sweep.particles = vec![1, 2, 4];
    spec.sweep.simulations = vec![4, 8];
    let swept = sweep_spec(&spec).unwrap();
    assert_eq!(swept.agents.len(), 6);
    let report = run_episodes(&swept).unwrap();
    assert_eq!(report.records.len(), 30);
    for a in &swept.agents {
        let c = a.config(&swept.search).unwrap();
        let rec = report.records.iter().find(|r| &r.agent == &a.label).unwrap();
        assert_eq!((rec.n, rec.m), (c.particles, c.simulations));
    }
}

#[test]
fn two_player_env_is_rejected_for_episodes() {
    let spec = tictactoe_spec(Vec::new());
    assert!(run_episodes(&spec).is_err());
    assert!(run_tournament(&cliff_spec(2)).is_err());
}

#[test]
fn elo_recovers_synthetic_ratings() {
    let truth = [0.0, 150.0, -100.0];
    let mut m = WinMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
    for i in 0..3 {
        for j in i + 1..3 {
            let p = 1.0 / (1.0 + 10f64.powf(-(truth[i] - truth[j]) / 400.0));
            let wins = (p * 4000.0).round() as u64;
            m.add_results(i, j, wins, 0, 4000 - wins);
        }
    }
    let fit = fit_bayes_elo(&m, 1e-12, 100_000).unwrap();
    for i in 0..3 {
        assert!((fit.ratings[i] - truth[i]).abs() < 2.0, "{:?}", fit.ratings);
    }
    assert_eq!(fit.half_widths[0], 0.0);
}
