//! Command-line entry point: single searches, episode evaluation,
//! tournaments, ablation ladders, parameter sweeps and opening books.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid
//! configuration or arguments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pmcts", version, about = "Parallel Monte Carlo tree search experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (JSON). Relative paths fall back to $PMCTS_CONFIG_DIR.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set particles=16` or `--set env.width=6`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Output file; the format follows the config's `format` key.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Number of logical workers for episodes, games and particles.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one search and print its result.
    Search {
        /// Root state; defaults to the environment's initial state.
        #[arg(long)]
        state: Option<usize>,
        /// Also print the search tree.
        #[arg(long)]
        tree: bool,
    },
    /// Play episodes with every agent and report mean returns.
    Evaluate,
    /// Play a round robin from an opening book on a two-player environment.
    Tournament,
    /// Run the six-rung ablation ladder from Simple PMCTS to PMCTS.
    Ablate,
    /// Run every cell of the (N, M, eta) grid.
    Sweep,
    /// Generate an opening book.
    Book,
}

fn main() -> ExitCode {
    let help = format!("Config keys and defaults:\n{}", config::documented_keys());
    let matches = Cli::command().after_long_help(help.clone()).after_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let mut stdout = std::io::stdout().lock();
    match commands::run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
