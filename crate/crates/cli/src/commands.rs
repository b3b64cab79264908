//! Subcommand implementations. Everything printed is deterministic given
//! the config; wallclock numbers only go to the log.

use std::io::Write;
use std::path::{Path, PathBuf};

use pmcts::engine::search_with_tree;
use pmcts::harness::{
    emit_results, fit_bayes_elo, ply_layer, run_ablation, run_episodes, run_sweep, run_tournament, book_for,
    EpisodeReport, ExperimentSpec, Metric, PairedTest,
};
use pmcts::{Error, Result};
use serde::Serialize;

use crate::config;
use crate::{Cli, Command};

const ELO_TOL: f64 = 1e-10;
const ELO_MAX_ITERS: usize = 100_000;

fn io(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

/// Loads the config, applies CLI flags and runs the subcommand.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let mut spec = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(w) = cli.workers {
        spec.workers = w;
        spec.search.workers = w;
    }
    if let Some(o) = &cli.output {
        spec.output = Some(o.clone());
    }
    spec.validate()?;
    match &cli.command {
        Command::Search { state, tree } => search(&spec, *state, *tree, out),
        Command::Evaluate => {
            let report = run_episodes(&spec)?;
            print_summary(&report, out)?;
            emit(&spec, &report)
        }
        Command::Ablate => {
            let report = run_ablation(&spec)?;
            print_summary(&report, out)?;
            print_ladder(&report, out)?;
            emit(&spec, &report)
        }
        Command::Sweep => {
            let report = run_sweep(&spec)?;
            print_summary(&report, out)?;
            emit(&spec, &report)
        }
        Command::Tournament => tournament(&spec, out),
        Command::Book => book(&spec, out),
    }
}

fn search(spec: &ExperimentSpec, state: Option<usize>, tree: bool, out: &mut dyn Write) -> Result<()> {
    let model = spec.build_env()?;
    let evaluator = spec.build_evaluator(&model)?;
    let root = state.unwrap_or_else(|| model.initial_state());
    if root >= model.state_count() {
        return Err(Error::Config(format!(
            "root state {root} out of range 0..{}",
            model.state_count()
        )));
    }
    let (r, t) = search_with_tree(model.as_ref(), evaluator.as_ref(), root, &spec.search)?;
    log::info!(
        "select {:.3} ms, expand {:.3} ms, backprop {:.3} ms",
        r.timings.select_ms,
        r.timings.expand_ms,
        r.timings.backprop_ms
    );
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    let q: Vec<String> = r
        .root_q
        .iter()
        .map(|q| q.map_or("-".to_string(), |q| format!("{q:.6}")))
        .collect();
    writeln!(out, "algorithm      {}", spec.search.algorithm.name()).map_err(io)?;
    writeln!(out, "env            {}", model.name()).map_err(io)?;
    writeln!(out, "root state     {root}").map_err(io)?;
    writeln!(out, "M x N          {} x {}", spec.search.simulations, spec.search.particles).map_err(io)?;
    writeln!(out, "chosen action  {}", r.chosen_action).map_err(io)?;
    writeln!(out, "pi_search      {}", fmt(&r.pi_search)).map_err(io)?;
    writeln!(out, "v_search       {:.6}", r.v_search).map_err(io)?;
    writeln!(out, "root visits    {}", fmt(&r.root_visits)).map_err(io)?;
    writeln!(out, "root q         {}", q.join(" ")).map_err(io)?;
    writeln!(out, "root value     {:.6}", r.root_value).map_err(io)?;
    writeln!(out, "nodes          {}", r.node_count).map_err(io)?;
    writeln!(out, "unique/iter    {:.3}", r.unique_trajectory_mean()).map_err(io)?;
    writeln!(out, "root ess/iter  {:.3}", r.ess_root_mean()).map_err(io)?;
    if tree {
        writeln!(out, "tree").map_err(io)?;
        write!(out, "{}", t.dump()).map_err(io)?;
    }
    if let Some(path) = &spec.output {
        write_json(path, &r)?;
    }
    Ok(())
}

fn print_summary(report: &EpisodeReport, out: &mut dyn Write) -> Result<()> {
    let width = report.agents.iter().map(|a| a.label.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:width$}  {:>8}  {:>10}  {:>10}  {:>10}  {:>9}", "agent", "episodes", "mean", "sem", "2sem", "truncated")
        .map_err(io)?;
    for a in &report.agents {
        let s = a.summary;
        writeln!(
            out,
            "{:width$}  {:>8}  {:>10.6}  {:>10.6}  {:>10.6}  {:>9}",
            a.label,
            s.n,
            s.mean,
            s.sem,
            s.half_width(),
            a.truncated
        )
        .map_err(io)?;
    }
    Ok(())
}

fn print_ladder(report: &EpisodeReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "paired differences (z > 1.645 is significant at one-sided 95%)").map_err(io)?;
    let first = &report.agents[0].label;
    for w in report.agents.windows(2) {
        let t = PairedTest::new(&report.returns(&w[1].label), &report.returns(&w[0].label));
        writeln!(out, "  {} - {}: {:+.6} (z {:+.3})", w[1].label, w[0].label, t.diff.mean, t.z).map_err(io)?;
    }
    if let Some(last) = report.agents.last() {
        let t = PairedTest::new(&report.returns(&last.label), &report.returns(first));
        writeln!(out, "  {} - {}: {:+.6} (z {:+.3})", last.label, first, t.diff.mean, t.z).map_err(io)?;
    }
    Ok(())
}

fn emit(spec: &ExperimentSpec, report: &EpisodeReport) -> Result<()> {
    if let Some(path) = &spec.output {
        emit_results(&report.records, spec.format, path)?;
        log::info!("wrote {} records to {}", report.records.len(), path.display());
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn tournament(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<()> {
    let report = run_tournament(spec)?;
    let m = &report.matrix;
    writeln!(out, "openings       {}", report.openings.len()).map_err(io)?;
    writeln!(out, "games          {}", m.total_games()).map_err(io)?;
    for (i, a) in m.agents.iter().enumerate() {
        for (j, b) in m.agents.iter().enumerate() {
            if i != j && m.results[i][j].games() > 0 {
                let r = m.results[i][j];
                writeln!(
                    out,
                    "{a} vs {b}: +{} ={} -{}",
                    r.total_wins(),
                    r.total_draws(),
                    r.total_losses()
                )
                .map_err(io)?;
            }
        }
    }
    for (i, a) in m.agents.iter().enumerate() {
        writeln!(out, "{a}: score rate {:.4}", m.win_rate(i)).map_err(io)?;
    }
    let elo = if spec.metric == Metric::BayesElo {
        let fit = fit_bayes_elo(m, ELO_TOL, ELO_MAX_ITERS)?;
        if fit.degenerate {
            writeln!(out, "all games drawn: ratings are degenerate").map_err(io)?;
        }
        for (i, a) in fit.agents.iter().enumerate() {
            writeln!(out, "{a}: elo {:+.1} ± {:.1}", fit.ratings[i], fit.half_widths[i]).map_err(io)?;
        }
        Some(fit)
    } else {
        None
    };
    if let Some(path) = &spec.output {
        #[derive(Serialize)]
        struct Output<'a> {
            tournament: &'a pmcts::harness::TournamentReport,
            elo: Option<pmcts::harness::EloFit>,
        }
        write_json(path, &Output {
            tournament: &report,
            elo,
        })?;
    }
    Ok(())
}

fn book(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<()> {
    let model = spec.build_env()?;
    let book = book_for(spec, model.as_ref())?;
    let layer = ply_layer(model.as_ref(), spec.book.plies).len();
    writeln!(
        out,
        "{} of {} requested positions ({layer} at ply {}, window [{}, {}])",
        book.states.len(),
        book.requested,
        spec.book.plies,
        spec.book.window[0],
        spec.book.window[1]
    )
    .map_err(io)?;
    for s in &book.states {
        writeln!(out, "{s}: {}", model.describe_state(*s)).map_err(io)?;
    }
    if let Some(path) = &spec.output {
        write_json(path, &book)?;
    }
    Ok(())
}
