//! Exact dynamic-programming ground truth for enumerable models.
//!
//! Values are always stored from the perspective of the agent (or, for
//! alternating games, the player) to move in the state, and
//! `q(s, a) = r(s, a) + c * v(next)` with `c = model.continuation()`, the
//! successor term dropped after a terminal transition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, StateId, Transition};
use crate::rng::{self, tag};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

/// Row-stochastic policy over every state of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub rows: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn from_rows(model: &dyn MdpModel, rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { rows };
        p.validate(model)?;
        Ok(p)
    }

    pub fn uniform(model: &dyn MdpModel) -> Self {
        let rows = (0..model.state_count())
            .map(|s| {
                let n = model.action_count(s);
                vec![1.0 / n as f64; n]
            })
            .collect();
        Self { rows }
    }

    /// Random full-support rows: `p(a) ∝ Exp(1) + floor`.
    pub fn random(model: &dyn MdpModel, seed: u64, floor: f64) -> Self {
        let rows = (0..model.state_count())
            .map(|s| {
                let n = model.action_count(s);
                let raw: Vec<f64> = (0..n)
                    .map(|a| -rng::open_unit(rng::key(&[seed, tag::PRIOR, s as u64, a as u64])).ln() + floor)
                    .collect();
                normalize(raw)
            })
            .collect();
        Self { rows }
    }

    /// One hashed action per state carries `mass`; the rest is spread uniformly.
    pub fn dominant(model: &dyn MdpModel, seed: u64, mass: f64) -> Self {
        let rows = (0..model.state_count())
            .map(|s| {
                let n = model.action_count(s);
                if n == 1 {
                    return vec![1.0];
                }
                let fav = (rng::splitmix64(rng::key(&[seed, tag::PRIOR, s as u64])) % n as u64) as usize;
                let rest = (1.0 - mass) / (n - 1) as f64;
                (0..n).map(|a| if a == fav { mass } else { rest }).collect()
            })
            .collect();
        Self { rows }
    }

    /// `p(a) ∝ exp(q(s, a) / temperature)`; a negative temperature favours bad actions.
    pub fn softmax(values: &ExactValues, temperature: f64) -> Self {
        let rows = values
            .q
            .iter()
            .map(|row| {
                let logits: Vec<f64> = row.iter().map(|q| q / temperature).collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                normalize(logits.iter().map(|l| (l - m).exp()).collect())
            })
            .collect();
        Self { rows }
    }

    /// All mass on the highest-valued action, ties to the lowest index.
    pub fn greedy(values: &ExactValues) -> Self {
        let rows = values
            .q
            .iter()
            .map(|row| {
                let best = argmax(row);
                (0..row.len()).map(|a| if a == best { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        Self { rows }
    }

    /// `(1 - lambda) * self + lambda * other`, row by row.
    pub fn blend(&self, other: &TabularPolicy, lambda: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect())
            .collect();
        Self { rows }
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.rows[state]
    }

    pub fn validate(&self, model: &dyn MdpModel) -> Result<()> {
        if self.rows.len() != model.state_count() {
            return Err(Error::Validation(format!(
                "policy has {} rows, model has {} states",
                self.rows.len(),
                model.state_count()
            )));
        }
        for (s, row) in self.rows.iter().enumerate() {
            if row.len() != model.action_count(s) {
                return Err(Error::Validation(format!("policy row {s} has wrong length")));
            }
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Validation(format!("policy row {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(())
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = a;
        }
    }
    best
}

/// Exact state and action values with the final Bellman residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValues {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub residual: f64,
    pub sweeps: usize,
}

impl ExactValues {
    /// Value of acting once with `row` in `state` and following the evaluated policy after.
    pub fn one_step_value(&self, state: StateId, row: &[f64]) -> f64 {
        row.iter().zip(&self.q[state]).map(|(p, q)| p * q).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

struct Tables {
    edges: Vec<Vec<Transition>>,
    c: f64,
}

impl Tables {
    fn build(model: &dyn MdpModel) -> Result<Self> {
        if !model.enumerable() {
            return Err(Error::Capability(format!("model {} is not enumerable", model.name())));
        }
        let edges = (0..model.state_count())
            .map(|s| (0..model.action_count(s)).map(|a| model.transition(s, a)).collect())
            .collect();
        Ok(Self {
            edges,
            c: model.continuation(),
        })
    }

    #[inline]
    fn q(&self, v: &[f64], s: usize, a: usize) -> f64 {
        let t = &self.edges[s][a];
        if t.terminal {
            t.reward
        } else {
            t.reward + self.c * v[t.next_state]
        }
    }

    fn q_table(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.edges.len())
            .map(|s| (0..self.edges[s].len()).map(|a| self.q(v, s, a)).collect())
            .collect()
    }
}

/// In-place Gauss-Seidel sweeps of `backup` until the sup-norm residual is below tolerance.
fn solve<F>(tables: &Tables, opts: &SolverOptions, backup: F) -> Result<ExactValues>
where
    F: Fn(&Tables, &[f64], usize) -> f64,
{
    if !(opts.tol > 0.0) {
        return Err(Error::Validation(format!("solver tolerance {} must be positive", opts.tol)));
    }
    let n = tables.edges.len();
    let mut v = vec![0.0; n];
    let mut last_change = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let mut change: f64 = 0.0;
        for s in (0..n).rev() {
            let new = backup(tables, &v, s);
            change = change.max((new - v[s]).abs());
            v[s] = new;
        }
        last_change = change;
        if change <= opts.tol {
            let residual = (0..n)
                .map(|s| (backup(tables, &v, s) - v[s]).abs())
                .fold(0.0, f64::max);
            if residual <= opts.tol {
                let q = tables.q_table(&v);
                return Ok(ExactValues {
                    v,
                    q,
                    residual,
                    sweeps: sweep,
                });
            }
        }
    }
    Err(Error::Divergence {
        iterations: opts.max_sweeps,
        last_change,
    })
}

pub fn policy_evaluation(model: &dyn MdpModel, policy: &TabularPolicy, tol: f64) -> Result<ExactValues> {
    policy_evaluation_with(
        model,
        policy,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn policy_evaluation_with(
    model: &dyn MdpModel,
    policy: &TabularPolicy,
    opts: &SolverOptions,
) -> Result<ExactValues> {
    let tables = Tables::build(model)?;
    policy.validate(model)?;
    solve(&tables, opts, |t, v, s| {
        policy.rows[s]
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, p)| p * t.q(v, s, a))
            .sum()
    })
}

pub fn value_iteration(model: &dyn MdpModel, tol: f64) -> Result<ExactValues> {
    value_iteration_with(
        model,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn value_iteration_with(model: &dyn MdpModel, opts: &SolverOptions) -> Result<ExactValues> {
    let tables = Tables::build(model)?;
    solve(&tables, opts, |t, v, s| {
        (0..t.edges[s].len())
            .map(|a| t.q(v, s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Row-wise `pi(a) ∝ prior(a) * exp(beta(s) * q(s, a))`.
pub fn improvement_operator_exact(
    prior: &TabularPolicy,
    q: &ExactValues,
    beta: &[f64],
) -> Result<TabularPolicy> {
    if beta.len() != prior.rows.len() || q.q.len() != prior.rows.len() {
        return Err(Error::Validation("prior, q and beta must cover the same states".into()));
    }
    let mut rows = Vec::with_capacity(prior.rows.len());
    for (s, row) in prior.rows.iter().enumerate() {
        let qs = &q.q[s];
        let top = row
            .iter()
            .zip(qs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(_, q)| *q)
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::Validation(format!("prior row {s} has no mass")));
        }
        let w: Vec<f64> = row
            .iter()
            .zip(qs)
            .map(|(p, q)| if *p > 0.0 { p * (beta[s] * (q - top)).exp() } else { 0.0 })
            .collect();
        rows.push(normalize(w));
    }
    Ok(TabularPolicy { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub prior_value: f64,
    pub improved_value: f64,
    pub difference: f64,
    pub passed: bool,
}

/// Compares `V(s_1)` of two policies at the model's initial state.
pub fn verify_policy_improvement(
    model: &dyn MdpModel,
    prior: &TabularPolicy,
    improved: &TabularPolicy,
    tol: f64,
) -> Result<ImprovementReport> {
    let s1 = model.initial_state();
    let prior_value = policy_evaluation(model, prior, DEFAULT_TOL)?.v[s1];
    let improved_value = policy_evaluation(model, improved, DEFAULT_TOL)?.v[s1];
    let difference = improved_value - prior_value;
    Ok(ImprovementReport {
        prior_value,
        improved_value,
        difference,
        passed: difference >= -tol,
    })
}

/// Value of picking one of `policies` uniformly at random once and following it throughout.
pub fn mixture_policy_value(model: &dyn MdpModel, policies: &[TabularPolicy], at_state: StateId) -> Result<f64> {
    if policies.is_empty() {
        return Err(Error::Validation("mixture needs at least one policy".into()));
    }
    let mut total = 0.0;
    for p in policies {
        total += policy_evaluation(model, p, DEFAULT_TOL)?.v[at_state];
    }
    Ok(total / policies.len() as f64)
}
