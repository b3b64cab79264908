//! Experiment orchestration: episodes, tournaments, opening books, Elo fits,
//! statistics and result files.
//!
//! Every run is keyed by the experiment seed. Episodes and games may run on
//! several workers, but records are collected in a fixed order, so output
//! files are identical for any worker count apart from wallclock columns.

mod agents;
mod book;
mod elo;
mod emit;
mod episodes;
mod ladder;
mod spec;
mod stats;
mod tournament;

pub use agents::{build_players, Move, Player};
pub use book::{generate_opening_book, ply_layer, scale_to_unit, OpeningBook};
pub use elo::{elo_expected_score, fit_bayes_elo, EloFit};
pub use emit::{emit_results, read_csv_records, read_json_records, write_results};
pub use episodes::{
    play_episode, run_episodes, step_seed, AgentStats, EpisodeOutcome, EpisodeRecord, EpisodeReport, EPISODE_COLUMNS,
};
pub use ladder::{ablation_spec, run_ablation, run_sweep, sweep_label, sweep_spec};
pub use spec::{
    AgentKind, AgentSpec, BookSpec, EvaluatorSpec, ExperimentSpec, Metric, OutputFormat, PriorSpec, SweepSpec,
};
pub use stats::{PairedTest, Summary, Z_95_ONE_SIDED};
pub use tournament::{
    book_for, play_game, run_tournament, run_tournament_with_openings, GameOutcome, PairRecord, TournamentReport,
    WinMatrix,
};
