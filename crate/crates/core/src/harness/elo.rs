use std::f64::consts::LN_10;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tournament::WinMatrix;

/// Two-sided 95% critical value of the standard normal.
const Z_95: f64 = 1.959_963_984_540_054;

/// Maximum-likelihood ratings on the Elo scale, anchored so agent 0 is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloFit {
    pub agents: Vec<String>,
    pub ratings: Vec<f64>,
    /// 95% half-widths from the observed information, zero for the anchor.
    pub half_widths: Vec<f64>,
    pub iterations: usize,
    /// No decisive games: ratings are reported as 0 and half-widths as infinite.
    pub degenerate: bool,
}

/// Expected score of a player rated `d` Elo above the opponent.
pub fn elo_expected_score(d: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-d / 400.0))
}

/// Fits Bradley-Terry strengths by minorization-maximization, draws counting as half a win.
///
/// Iterates until the largest relative change of a strength is below `tol`.
pub fn fit_bayes_elo(matrix: &WinMatrix, tol: f64, max_iters: usize) -> Result<EloFit> {
    let k = matrix.agents.len();
    if k < 2 {
        return Err(Error::Estimation("need at least two agents".into()));
    }
    if !matrix.is_consistent() {
        return Err(Error::Estimation("win matrix orderings disagree".into()));
    }
    let games: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { matrix.results[i][j].games() as f64 }).collect())
        .collect();
    let score: Vec<f64> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    let r = &matrix.results[i][j];
                    r.total_wins() as f64 + 0.5 * r.total_draws() as f64
                })
                .sum()
        })
        .collect();

    let components = components(&games);
    if components.len() > 1 {
        let names: Vec<String> = components
            .iter()
            .map(|c| format!("{{{}}}", c.iter().map(|&i| matrix.agents[i].as_str()).collect::<Vec<_>>().join(", ")))
            .collect();
        return Err(Error::Estimation(format!("match graph is disconnected: {}", names.join(" "))));
    }
    let decisive: u64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| matrix.results[i][j].total_wins())
        .sum();
    if decisive == 0 {
        log::warn!("all games drawn: rating fit is degenerate");
        return Ok(EloFit {
            agents: matrix.agents.clone(),
            ratings: vec![0.0; k],
            half_widths: (0..k).map(|i| if i == 0 { 0.0 } else { f64::INFINITY }).collect(),
            iterations: 0,
            degenerate: true,
        });
    }
    for i in 0..k {
        let total: f64 = games[i].iter().sum();
        if score[i] == 0.0 || score[i] == total {
            return Err(Error::Estimation(format!(
                "agent {} has a {} score: its rating is unbounded",
                matrix.agents[i],
                if score[i] == 0.0 { "zero" } else { "perfect" }
            )));
        }
    }

    let mut gamma = vec![1.0; k];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = vec![0.0; k];
        for i in 0..k {
            let denom: f64 = (0..k)
                .filter(|&j| j != i && games[i][j] > 0.0)
                .map(|j| games[i][j] / (gamma[i] + gamma[j]))
                .sum();
            next[i] = score[i] / denom;
        }
        let norm = next[0];
        next.iter_mut().for_each(|g| *g /= norm);
        let change = next
            .iter()
            .zip(&gamma)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        gamma = next;
        if change < tol {
            break;
        }
        if iterations >= max_iters {
            return Err(Error::Estimation(format!(
                "rating fit did not converge in {max_iters} iterations (last change {change:e})"
            )));
        }
    }

    let to_elo = 400.0 / LN_10;
    let ratings: Vec<f64> = gamma.iter().map(|g| g.ln() * to_elo).collect();
    let mut info = DMatrix::<f64>::zeros(k - 1, k - 1);
    for i in 0..k {
        for j in 0..k {
            if i == j || games[i][j] == 0.0 {
                continue;
            }
            let p = gamma[i] / (gamma[i] + gamma[j]);
            let w = games[i][j] * p * (1.0 - p);
            if i > 0 {
                info[(i - 1, i - 1)] += w;
                if j > 0 {
                    info[(i - 1, j - 1)] -= w;
                }
            }
        }
    }
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Estimation("observed information is singular".into()))?;
    let half_widths = (0..k)
        .map(|i| if i == 0 { 0.0 } else { Z_95 * cov[(i - 1, i - 1)].sqrt() * to_elo })
        .collect();
    Ok(EloFit {
        agents: matrix.agents.clone(),
        ratings,
        half_widths,
        iterations,
        degenerate: false,
    })
}

/// Connected components of the graph with an edge wherever games were played.
fn components(games: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let k = games.len();
    let mut seen = vec![false; k];
    let mut out = Vec::new();
    for start in 0..k {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            for v in 0..k {
                if !seen[v] && (games[u][v] > 0.0 || games[v][u] > 0.0) {
                    seen[v] = true;
                    comp.push(v);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
