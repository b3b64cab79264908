//! Selection policies: the regularized improvement operator, tempered
//! proposals and importance ratios, PUCT with virtual visits, and the
//! sequential-halving budget schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::ActionId;
use crate::tree::{completed_q, NodeId, SearchTree};

/// `beta = (c_visit + max_a M(s, a)) * c_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub c_visit: f64,
    pub c_scale: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            c_visit: 50.0,
            c_scale: 0.1,
        }
    }
}

impl BetaSchedule {
    pub fn beta(&self, max_child_mass: f64) -> f64 {
        (self.c_visit + max_child_mass) / self.c_scale.recip()
    }

    pub fn beta_at(&self, tree: &SearchTree, id: NodeId) -> f64 {
        let max = tree.child_masses(id).into_iter().fold(0.0, f64::max);
        self.beta(max)
    }
}

/// `pi(a) ∝ exp(ln prior(a) + beta * q(a))`, normalized with max-subtraction.
pub fn improved_policy(prior: &[f64], q: &[f64], beta: f64) -> Result<Vec<f64>> {
    if prior.len() != q.len() {
        return Err(Error::Validation("prior and q lengths differ".into()));
    }
    if let Some(bad) = q.iter().find(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("non-finite q value {bad}")));
    }
    let logits: Vec<f64> = prior.iter().zip(q).map(|(p, q)| p.ln() + beta * q).collect();
    softmax(&logits)
}

/// Improved policy at a tree node from its completed action values.
pub fn improved_policy_at(tree: &SearchTree, id: NodeId, schedule: &BetaSchedule) -> Result<Vec<f64>> {
    let node = tree.node(id);
    let q = completed_q(tree, id, node.prior_value);
    improved_policy(&node.prior, &q, schedule.beta_at(tree, id))
}

fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return Err(Error::Validation("distribution has no support".into()));
    }
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|x| x / z).collect())
}

/// `proposal(a) ∝ target(a)^(1/eta)`; `eta == 1` returns the target unchanged.
pub fn proposal_policy(target: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Validation(format!("temperature {eta} must be positive and finite")));
    }
    if eta == 1.0 {
        return Ok(target.to_vec());
    }
    let logits: Vec<f64> = target.iter().map(|p| p.ln() / eta).collect();
    softmax(&logits)
}

/// `prev_weight * target / proposal`.
pub fn importance_ratio(target_prob: f64, proposal_prob: f64, prev_weight: f64) -> Result<f64> {
    if !(proposal_prob > 0.0) {
        return Err(Error::ImportanceSupport { target: target_prob });
    }
    Ok(prev_weight * (target_prob / proposal_prob))
}

/// `(sum w)^2 / sum w^2`; zero for an all-zero weight vector.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Inverse-CDF draw over the fixed action order from one uniform in [0, 1).
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Lowest index attaining the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuctConstants {
    pub c_base: f64,
    pub c_init: f64,
}

impl Default for PuctConstants {
    fn default() -> Self {
        Self {
            c_base: 19652.0,
            c_init: 1.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirtualMode {
    /// Each in-flight visit counts as a return of -1.
    Losses,
    /// In-flight visits only inflate the counts; `q` is left unchanged.
    Means,
}

/// Node statistics seen by the PUCT rule.
#[derive(Debug, Clone)]
pub struct PuctContext<'a> {
    pub prior: &'a [f64],
    pub visits: &'a [f64],
    pub q: &'a [Option<f64>],
    pub virtual_visits: &'a [f64],
    pub node_mass: f64,
    pub node_virtual: f64,
    pub v_phi: f64,
}

/// Deterministic PUCT argmax with virtual visits.
///
/// `score(a) = q_norm(a) + prior(a) * C * sqrt(M + M_v) / (1 + M(a) + M_v(a))`
/// with `C = c_init + ln((M + M_v + c_base + 1) / c_base)`. Values of
/// unvisited actions are completed with `v_phi`, every value is min-max
/// normalized, and unvisited actions then get 0.
pub fn puct_virtual(ctx: &PuctContext, consts: &PuctConstants, mode: VirtualMode) -> ActionId {
    let n = ctx.prior.len();
    let mut vals = vec![0.0; n];
    let mut visited = vec![false; n];
    for a in 0..n {
        let m = ctx.visits[a];
        let mv = ctx.virtual_visits[a];
        let q = ctx.q[a];
        match mode {
            VirtualMode::Losses => {
                if m + mv > 0.0 {
                    visited[a] = true;
                    vals[a] = (q.unwrap_or(0.0) * m - mv) / (m + mv);
                }
            }
            VirtualMode::Means => {
                if let (true, Some(q)) = (m > 0.0, q) {
                    visited[a] = true;
                    vals[a] = q;
                }
            }
        }
        if !visited[a] {
            vals[a] = ctx.v_phi;
        }
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-8);
    let total = ctx.node_mass + ctx.node_virtual;
    let c = consts.c_init + ((total + consts.c_base + 1.0) / consts.c_base).ln();
    let scores: Vec<f64> = (0..n)
        .map(|a| {
            let qn = if visited[a] { (vals[a] - lo) / span } else { 0.0 };
            qn + ctx.prior[a] * c * total.sqrt() / (1.0 + ctx.visits[a] + ctx.virtual_visits[a])
        })
        .collect();
    argmax(&scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShPhase {
    pub actions: usize,
    pub per_action: usize,
}

/// Sequential-halving budget over `M * N` simulations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShSchedule {
    pub phases: Vec<ShPhase>,
    pub total: usize,
}

impl ShSchedule {
    pub fn allocated(&self) -> usize {
        self.phases.iter().map(|p| p.actions * p.per_action).sum()
    }
}

/// `log2 K` phases; phase `i` gives `floor(floor(MN / log2 K) / K_i)` to each
/// of `K_i = K / 2^i` actions, and what is left is spread over the final phase.
pub fn sh_schedule(simulations: usize, particles: usize, top_k: usize) -> Result<ShSchedule> {
    if top_k < 2 || !top_k.is_power_of_two() {
        return Err(Error::Validation(format!("top_k {top_k} must be a power of two >= 2")));
    }
    let total = simulations * particles;
    let rounds = top_k.trailing_zeros() as usize;
    if total < top_k * rounds {
        return Err(Error::Validation(format!(
            "budget {total} too small for top_k {top_k} (needs {})",
            top_k * rounds
        )));
    }
    let per_phase = total / rounds;
    let mut phases: Vec<ShPhase> = (0..rounds)
        .map(|i| {
            let actions = top_k >> i;
            ShPhase {
                actions,
                per_action: per_phase / actions,
            }
        })
        .collect();
    let used: usize = phases.iter().map(|p| p.actions * p.per_action).sum();
    let last = phases.last_mut().expect("at least one phase");
    last.per_action += (total - used) / last.actions;
    Ok(ShSchedule { phases, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    ArgmaxImproved,
    SampleRestricted,
    MaxVisits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootDecision {
    pub action: ActionId,
    pub pi_search: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub v_search: f64,
}

/// `pi` zeroed outside `visited` and renormalized.
pub fn restrict_to_visited(pi: &[f64], visited: &[bool]) -> Vec<f64> {
    let z: f64 = pi.iter().zip(visited).filter(|(_, v)| **v).map(|(p, _)| p).sum();
    let k = visited.iter().filter(|v| **v).count() as f64;
    pi.iter()
        .zip(visited)
        .map(|(p, &v)| match (v, z > 0.0) {
            (false, _) => 0.0,
            (true, true) => p / z,
            (true, false) => 1.0 / k,
        })
        .collect()
}

/// Final root decision from the tree. `u` is only used by `SampleRestricted`.
pub fn root_action_selection(
    tree: &SearchTree,
    schedule: &BetaSchedule,
    mode: ActionSelection,
    u: f64,
) -> Result<RootDecision> {
    let root = crate::tree::ROOT;
    let q = tree.q_values(root);
    let visited: Vec<bool> = q.iter().map(Option::is_some).collect();
    if !visited.iter().any(|v| *v) {
        return Err(Error::SearchFailure("no visited root action".into()));
    }
    let pi_search = improved_policy_at(tree, root, schedule)?;
    let pi_bar = restrict_to_visited(&pi_search, &visited);
    let v_search = pi_bar
        .iter()
        .zip(&q)
        .filter_map(|(p, q)| q.map(|q| p * q))
        .sum();
    let masked = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(&visited)
            .map(|(x, &v)| if v { *x } else { f64::NEG_INFINITY })
            .collect()
    };
    let action = match mode {
        ActionSelection::ArgmaxImproved => argmax(&masked(&pi_search)),
        ActionSelection::SampleRestricted => sample_index(&pi_bar, u),
        ActionSelection::MaxVisits => argmax(&masked(&tree.child_masses(root))),
    };
    Ok(RootDecision {
        action,
        pi_search,
        pi_bar,
        v_search,
    })
}
