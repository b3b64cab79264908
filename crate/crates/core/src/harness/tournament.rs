use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::worker_pool;
use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::mdp::{MdpModel, StateId};
use crate::oracle;
use crate::rng::{self, tag};

use super::agents::{build_players, Player};
use super::book::{generate_opening_book, scale_to_unit};
use super::spec::ExperimentSpec;

/// Result of one game from the first mover's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameOutcome {
    FirstWins,
    SecondWins,
    Draw,
}

/// Results of agent `i` against agent `j`, split by side.
///
/// Index 0 counts games where `i` moved first, index 1 where `i` moved second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub wins: [u64; 2],
    pub draws: [u64; 2],
    pub losses: [u64; 2],
}

impl PairRecord {
    pub fn games(&self) -> u64 {
        self.wins.iter().chain(&self.draws).chain(&self.losses).sum()
    }

    pub fn total_wins(&self) -> u64 {
        self.wins.iter().sum()
    }

    pub fn total_draws(&self) -> u64 {
        self.draws.iter().sum()
    }

    pub fn total_losses(&self) -> u64 {
        self.losses.iter().sum()
    }
}

/// Head-to-head results for every ordered pair of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub agents: Vec<String>,
    /// `results[i][j]`: agent `i`'s record against agent `j`.
    pub results: Vec<Vec<PairRecord>>,
}

impl WinMatrix {
    pub fn new(agents: Vec<String>) -> Self {
        let n = agents.len();
        Self {
            agents,
            results: vec![vec![PairRecord::default(); n]; n],
        }
    }

    /// Records one game between `first` and `second`, keeping both orderings consistent.
    pub fn record(&mut self, first: usize, second: usize, outcome: GameOutcome) {
        match outcome {
            GameOutcome::FirstWins => {
                self.results[first][second].wins[0] += 1;
                self.results[second][first].losses[1] += 1;
            }
            GameOutcome::SecondWins => {
                self.results[first][second].losses[0] += 1;
                self.results[second][first].wins[1] += 1;
            }
            GameOutcome::Draw => {
                self.results[first][second].draws[0] += 1;
                self.results[second][first].draws[1] += 1;
            }
        }
    }

    /// Adds `wins`, `draws` and `losses` of `i` against `j`, split evenly by side.
    pub fn add_results(&mut self, i: usize, j: usize, wins: u64, draws: u64, losses: u64) {
        for (count, outcome_i_first) in [
            (wins, GameOutcome::FirstWins),
            (draws, GameOutcome::Draw),
            (losses, GameOutcome::SecondWins),
        ] {
            for k in 0..count {
                if k % 2 == 0 {
                    self.record(i, j, outcome_i_first);
                } else {
                    let flipped = match outcome_i_first {
                        GameOutcome::FirstWins => GameOutcome::SecondWins,
                        GameOutcome::SecondWins => GameOutcome::FirstWins,
                        GameOutcome::Draw => GameOutcome::Draw,
                    };
                    self.record(j, i, flipped);
                }
            }
        }
    }

    pub fn total_games(&self) -> u64 {
        let n = self.agents.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.results[i][j].games())
            .sum()
    }

    /// Share of points (draws count half) scored by `i` against everyone.
    pub fn win_rate(&self, i: usize) -> f64 {
        let (mut pts, mut games) = (0.0, 0u64);
        for r in &self.results[i] {
            pts += r.total_wins() as f64 + 0.5 * r.total_draws() as f64;
            games += r.games();
        }
        if games == 0 {
            f64::NAN
        } else {
            pts / games as f64
        }
    }

    /// Both orderings of every pair report the same games.
    pub fn is_consistent(&self) -> bool {
        let n = self.agents.len();
        self.results.len() == n
            && (0..n).all(|i| {
                (0..n).all(|j| {
                    let a = self.results[i][j];
                    let b = self.results[j][i];
                    a.wins == [b.losses[1], b.losses[0]]
                        && a.losses == [b.wins[1], b.wins[0]]
                        && a.draws == [b.draws[1], b.draws[0]]
                })
            })
    }
}

/// Plays one game from `opening`; `first` moves first. Adjudicated a draw at the length cap.
pub fn play_game(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    first: &Player,
    second: &Player,
    opening: StateId,
    game_seed: u64,
) -> Result<GameOutcome> {
    let mut state = opening;
    for ply in 0..model.max_episode_length() {
        let mover = if ply % 2 == 0 { first } else { second };
        let mv = mover.act(model, evaluator, state, rng::key(&[game_seed, ply as u64]))?;
        let t = model.transition(state, mv.action);
        if t.terminal {
            let first_moved = ply % 2 == 0;
            return Ok(match (t.reward > 0.0, t.reward < 0.0, first_moved) {
                (true, _, true) | (_, true, false) => GameOutcome::FirstWins,
                (true, _, false) | (_, true, true) => GameOutcome::SecondWins,
                _ => GameOutcome::Draw,
            });
        }
        state = t.next_state;
    }
    Ok(GameOutcome::Draw)
}

/// Everything a tournament produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub matrix: WinMatrix,
    pub openings: Vec<StateId>,
}

/// Builds the opening book described by the spec from exact optimal values.
pub fn book_for(spec: &ExperimentSpec, model: &dyn MdpModel) -> Result<super::OpeningBook> {
    let values = oracle::value_iteration(model, oracle::DEFAULT_TOL)?;
    generate_opening_book(
        model,
        &scale_to_unit(&values.v),
        spec.book.plies,
        spec.book.window,
        spec.book.count,
        spec.seed,
    )
}

/// Round robin over every pair of agents, each opening played from both sides.
pub fn run_tournament(spec: &ExperimentSpec) -> Result<TournamentReport> {
    spec.validate()?;
    let model = spec.build_env()?;
    let book = book_for(spec, model.as_ref())?;
    run_tournament_with_openings(spec, &book.states)
}

/// Like [`run_tournament`] with an explicit list of openings.
pub fn run_tournament_with_openings(spec: &ExperimentSpec, openings: &[StateId]) -> Result<TournamentReport> {
    spec.validate()?;
    let model = spec.build_env()?;
    if !model.two_player() {
        return Err(Error::Validation(format!("tournaments need a two-player environment, {} is not", model.name())));
    }
    if openings.is_empty() {
        return Err(Error::Validation("opening book is empty".into()));
    }
    let evaluator = spec.build_evaluator(&model)?;
    let players = build_players(spec, model.as_ref())?;
    let n = players.len();
    let mut jobs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for (o, _) in openings.iter().enumerate() {
                jobs.push((i, j, o));
                jobs.push((j, i, o));
            }
        }
    }
    let play = |&(first, second, o): &(usize, usize, usize)| {
        let seed = rng::key(&[spec.seed, tag::GAME, o as u64]);
        play_game(
            model.as_ref(),
            evaluator.as_ref(),
            &players[first].1,
            &players[second].1,
            openings[o],
            seed,
        )
    };
    let outcomes: Vec<GameOutcome> = match worker_pool(spec.workers) {
        Some(pool) => pool.install(|| jobs.par_iter().map(play).collect::<Result<Vec<_>>>())?,
        None => jobs.iter().map(play).collect::<Result<Vec<_>>>()?,
    };
    let mut matrix = WinMatrix::new(players.iter().map(|(l, _)| l.clone()).collect());
    for (&(first, second, _), outcome) in jobs.iter().zip(outcomes) {
        matrix.record(first, second, outcome);
    }
    Ok(TournamentReport {
        matrix,
        openings: openings.to_vec(),
    })
}
