//! One search iteration in four phases: selection, expansion, weight
//! finalization (retrospective reweighting and merging) and backpropagation.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, Estimator, LeafNoise, SearchConfig};
use crate::error::Result;
use crate::evaluators::Evaluator;
use crate::mdp::{ActionId, MdpModel, StateId};
use crate::policies::{
    argmax, effective_sample_size, importance_ratio, improved_policy_at, proposal_policy, puct_virtual,
    sample_index, BetaSchedule, PuctContext, VirtualMode,
};
use crate::rng::{self, tag};
use crate::tree::{leaf_node, stable_weighted_update, NodeId, SearchTree, ROOT};

/// One selection trajectory and its importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub index: usize,
    /// Node indices from the root; after expansion the last entry is the leaf.
    pub path: Vec<NodeId>,
    pub actions: Vec<ActionId>,
    /// Unexpanded edge the trajectory stopped at, cleared by expansion.
    pub pending: Option<(NodeId, ActionId)>,
    pub weight: f64,
    /// `depth_weights[t]` is the product of the ratios of steps taken from depth `t` on.
    pub depth_weights: Vec<f64>,
    /// Target and proposal probability of the final step.
    pub last_target: f64,
    pub last_proposal: f64,
    /// The final step was drawn from the proposal rather than forced.
    pub last_sampled: bool,
    pub leaf_value: f64,
    pub new_leaf: bool,
    /// Cleared when merging folds this particle into a lower-indexed duplicate.
    pub representative: bool,
}

impl Particle {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            path: vec![ROOT],
            actions: Vec::new(),
            pending: None,
            weight: 1.0,
            depth_weights: vec![1.0],
            last_target: 1.0,
            last_proposal: 1.0,
            last_sampled: false,
            leaf_value: 0.0,
            new_leaf: false,
            representative: true,
        }
    }

    pub fn leaf(&self) -> NodeId {
        *self.path.last().expect("path starts at the root")
    }

    pub fn depth(&self) -> usize {
        self.path.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleBatch {
    pub iteration: usize,
    pub particles: Vec<Particle>,
}

impl ParticleBatch {
    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Number of distinct leaves (or pending edges) in the batch.
    pub fn unique_trajectories(&self) -> usize {
        let mut keys: Vec<(NodeId, Option<(NodeId, ActionId)>)> =
            self.particles.iter().map(|p| (p.leaf(), p.pending)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

/// How interior actions are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// Sample from the (tempered) improved policy.
    Stochastic,
    /// Deterministic visit-deficit rule of sequential Gumbel search.
    VisitDeficit,
    /// PUCT with virtual visits, particles selected one after another.
    Puct(VirtualMode),
}

impl SelectionRule {
    pub fn for_config(cfg: &SearchConfig) -> Self {
        match cfg.algorithm {
            Algorithm::GumbelMcts | Algorithm::RootParallelGumbel => SelectionRule::VisitDeficit,
            a => a.virtual_mode().map_or(SelectionRule::Stochastic, SelectionRule::Puct),
        }
    }
}

fn record_step(p: &mut Particle, action: ActionId, ratio: f64, target: f64, proposal: f64, sampled: bool, per_depth: bool) {
    p.actions.push(action);
    if per_depth {
        p.depth_weights.iter_mut().for_each(|w| *w *= ratio);
        p.depth_weights.push(1.0);
    }
    p.last_target = target;
    p.last_proposal = proposal;
    p.last_sampled = sampled;
}

/// Advances the particle along `action`; returns `false` once it stops.
fn descend(tree: &SearchTree, p: &mut Particle, node: NodeId, action: ActionId) -> bool {
    match tree.child(node, action) {
        Some(c) => {
            p.path.push(c);
            !tree.node(c).terminal
        }
        None => {
            p.pending = Some((node, action));
            false
        }
    }
}

fn select_stochastic(
    tree: &SearchTree,
    cfg: &SearchConfig,
    schedule: &BetaSchedule,
    iteration: usize,
    index: usize,
    forced_root: Option<ActionId>,
) -> Result<Particle> {
    let mut p = Particle::new(index);
    let tempered = cfg.algorithm == Algorithm::Pmcts;
    let mut node = ROOT;
    loop {
        let depth = p.depth();
        let target = improved_policy_at(tree, node, schedule)?;
        let (action, ratio, t, q, sampled) = match (depth, forced_root) {
            (0, Some(a)) => (a, 1.0, target[a], target[a], false),
            _ => {
                let proposal = if tempered { proposal_policy(&target, cfg.eta)? } else { target.clone() };
                let u = rng::unit(rng::key(&[
                    cfg.seed,
                    tag::SELECT,
                    iteration as u64,
                    index as u64,
                    depth as u64,
                ]));
                let a = sample_index(&proposal, u);
                let ratio = if tempered && cfg.importance_correction {
                    importance_ratio(target[a], proposal[a], 1.0)?
                } else {
                    1.0
                };
                (a, ratio, target[a], proposal[a], true)
            }
        };
        p.weight *= ratio;
        record_step(&mut p, action, ratio, t, q, sampled, cfg.per_depth_weights);
        if !descend(tree, &mut p, node, action) {
            return Ok(p);
        }
        node = p.leaf();
    }
}

fn select_visit_deficit(
    tree: &SearchTree,
    schedule: &BetaSchedule,
    index: usize,
    forced_root: Option<ActionId>,
) -> Result<Particle> {
    let mut p = Particle::new(index);
    let mut node = ROOT;
    loop {
        let action = match (p.depth(), forced_root) {
            (0, Some(a)) => a,
            _ => {
                let pi = improved_policy_at(tree, node, schedule)?;
                let masses = tree.child_masses(node);
                let total: f64 = masses.iter().sum();
                let scores: Vec<f64> = pi.iter().zip(&masses).map(|(p, m)| p - m / (1.0 + total)).collect();
                argmax(&scores)
            }
        };
        record_step(&mut p, action, 1.0, 1.0, 1.0, false, false);
        if !descend(tree, &mut p, node, action) {
            return Ok(p);
        }
        node = p.leaf();
    }
}

fn select_puct(tree: &SearchTree, cfg: &SearchConfig, mode: VirtualMode) -> Vec<Particle> {
    let consts = cfg.puct_constants();
    let mut vnode: HashMap<NodeId, f64> = HashMap::new();
    let mut vedge: HashMap<(NodeId, ActionId), f64> = HashMap::new();
    let mut out = Vec::with_capacity(cfg.particles);
    for index in 0..cfg.particles {
        let mut p = Particle::new(index);
        let mut node = ROOT;
        loop {
            let n = tree.node(node);
            let visits = tree.child_masses(node);
            let q = tree.q_values(node);
            let virt: Vec<f64> = (0..n.children.len())
                .map(|a| vedge.get(&(node, a)).copied().unwrap_or(0.0))
                .collect();
            let ctx = PuctContext {
                prior: &n.prior,
                visits: &visits,
                q: &q,
                virtual_visits: &virt,
                node_mass: n.visit_mass,
                node_virtual: vnode.get(&node).copied().unwrap_or(0.0),
                v_phi: n.prior_value,
            };
            let action = puct_virtual(&ctx, &consts, mode);
            *vnode.entry(node).or_default() += 1.0;
            *vedge.entry((node, action)).or_default() += 1.0;
            record_step(&mut p, action, 1.0, 1.0, 1.0, false, false);
            if !descend(tree, &mut p, node, action) {
                break;
            }
            node = p.leaf();
        }
        *vnode.entry(p.leaf()).or_default() += 1.0;
        out.push(p);
    }
    out
}

/// Selects `N` trajectories from a read-only tree.
///
/// Particles are independent: each draws from its own counter-keyed stream,
/// so the batch does not depend on how many workers run it. PUCT baselines
/// are the exception by design and select one particle after another.
pub fn select_particles(
    tree: &SearchTree,
    cfg: &SearchConfig,
    iteration: usize,
    forced_root: &[Option<ActionId>],
    pool: Option<&rayon::ThreadPool>,
) -> Result<ParticleBatch> {
    let schedule = cfg.beta_schedule();
    let rule = SelectionRule::for_config(cfg);
    let one = |n: usize| -> Result<Particle> {
        let forced = forced_root.get(n).copied().flatten();
        match rule {
            SelectionRule::Stochastic => select_stochastic(tree, cfg, &schedule, iteration, n, forced),
            SelectionRule::VisitDeficit => select_visit_deficit(tree, &schedule, n, forced),
            SelectionRule::Puct(_) => unreachable!("handled below"),
        }
    };
    let particles = match (rule, pool) {
        (SelectionRule::Puct(mode), _) => select_puct(tree, cfg, mode),
        (_, Some(pool)) if cfg.particles > 1 => {
            pool.install(|| (0..cfg.particles).into_par_iter().map(one).collect::<Result<Vec<_>>>())?
        }
        _ => (0..cfg.particles).map(one).collect::<Result<Vec<_>>>()?,
    };
    Ok(ParticleBatch { iteration, particles })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExpansionStats {
    pub new_nodes: usize,
    pub evaluations: usize,
}

/// Adds the batch's pending edges to the tree and evaluates the new leaves
/// in one evaluator call.
///
/// When several particles stop at the same edge the lowest-indexed one
/// creates the node and the others point to it; nodes are allocated in that
/// winner order. Terminal leaves get value 0 without an evaluation.
pub fn expand_batch(
    tree: &mut SearchTree,
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    batch: &mut ParticleBatch,
    cfg: &SearchConfig,
) -> Result<ExpansionStats> {
    let iteration = batch.iteration as u64;
    let mut winners: BTreeMap<(NodeId, ActionId), usize> = BTreeMap::new();
    let mut order: Vec<(NodeId, ActionId)> = Vec::new();
    for p in &batch.particles {
        if let Some(edge) = p.pending {
            winners.entry(edge).or_insert_with(|| {
                order.push(edge);
                p.index
            });
        }
    }
    let outcomes: Vec<_> = order
        .iter()
        .map(|&(parent, a)| model.transition(tree.node(parent).state, a))
        .collect();

    // evaluation requests
    let mut requests: Vec<(StateId, u64)> = Vec::new();
    let mut state_slot: HashMap<StateId, usize> = HashMap::new();
    let mut particle_slot: Vec<Option<usize>> = vec![None; batch.particles.len()];
    match cfg.leaf_noise {
        LeafNoise::Shared => {
            for t in outcomes.iter().filter(|t| !t.terminal) {
                state_slot.entry(t.next_state).or_insert_with(|| {
                    requests.push((
                        t.next_state,
                        rng::key(&[cfg.seed, tag::EVAL, iteration, t.next_state as u64]),
                    ));
                    requests.len() - 1
                });
            }
        }
        LeafNoise::PerParticle => {
            let edge_index: HashMap<(NodeId, ActionId), usize> =
                order.iter().enumerate().map(|(i, e)| (*e, i)).collect();
            for p in &batch.particles {
                if let Some(edge) = p.pending {
                    let t = &outcomes[edge_index[&edge]];
                    if !t.terminal {
                        requests.push((
                            t.next_state,
                            rng::key(&[cfg.seed, tag::EVAL_DUP, iteration, p.index as u64]),
                        ));
                        particle_slot[p.index] = Some(requests.len() - 1);
                    }
                }
            }
        }
    }
    let evals = if requests.is_empty() {
        Vec::new()
    } else {
        evaluator.batch_evaluate(&requests)?
    };

    // node values: the shared evaluation, or the mean of the particles' draws
    let mut draws_per_edge: HashMap<(NodeId, ActionId), (f64, usize, usize)> = HashMap::new();
    if cfg.leaf_noise == LeafNoise::PerParticle {
        for p in &batch.particles {
            if let (Some(edge), Some(slot)) = (p.pending, particle_slot[p.index]) {
                let e = draws_per_edge.entry(edge).or_insert((0.0, 0, slot));
                e.0 += evals[slot].value;
                e.1 += 1;
            }
        }
    }
    let mut created: HashMap<(NodeId, ActionId), NodeId> = HashMap::new();
    for (edge, t) in order.iter().zip(&outcomes) {
        let (parent, a) = *edge;
        let node = if t.terminal {
            leaf_node(t.next_state, 0, t.reward, true, Vec::new(), 0.0)
        } else {
            let (prior, value) = match cfg.leaf_noise {
                LeafNoise::Shared => {
                    let e = &evals[state_slot[&t.next_state]];
                    (e.prior.clone(), e.value)
                }
                LeafNoise::PerParticle => {
                    let (sum, n, slot) = draws_per_edge[edge];
                    (evals[slot].prior.clone(), sum / n as f64)
                }
            };
            let n_actions = model.action_count(t.next_state);
            if prior.len() != n_actions {
                return Err(crate::error::Error::Validation(format!(
                    "evaluator prior has {} entries, state {} has {n_actions} actions",
                    prior.len(),
                    t.next_state
                )));
            }
            leaf_node(t.next_state, n_actions, t.reward, false, prior, value)
        };
        created.insert(*edge, tree.add_child(parent, a, node)?);
    }

    for p in batch.particles.iter_mut() {
        match p.pending.take() {
            Some(edge) => {
                let id = created[&edge];
                p.path.push(id);
                p.new_leaf = true;
                p.leaf_value = match particle_slot[p.index] {
                    Some(slot) => evals[slot].value,
                    None => tree.node(id).value,
                };
            }
            None => {
                p.new_leaf = false;
                p.leaf_value = tree.node(p.leaf()).value;
            }
        }
    }
    Ok(ExpansionStats {
        new_nodes: order.len(),
        evaluations: requests.len(),
    })
}

/// Replaces each particle's final target probability by the one of the
/// parent's policy recomputed after expansion.
pub fn retrospective_reweight(tree: &SearchTree, batch: &mut ParticleBatch, schedule: &BetaSchedule) -> Result<()> {
    let mut cache: HashMap<NodeId, Vec<f64>> = HashMap::new();
    for p in batch.particles.iter_mut() {
        if !p.last_sampled || p.depth() == 0 {
            continue;
        }
        let parent = p.path[p.path.len() - 2];
        let a = *p.actions.last().expect("sampled step has an action");
        let next = match cache.get(&parent) {
            Some(pi) => pi[a],
            None => {
                let pi = improved_policy_at(tree, parent, schedule)?;
                let x = pi[a];
                cache.insert(parent, pi);
                x
            }
        };
        let factor = next / p.last_target;
        p.weight *= factor;
        let last = p.depth_weights.len().saturating_sub(1);
        p.depth_weights[..last].iter_mut().for_each(|w| *w *= factor);
        p.last_target = next;
    }
    Ok(())
}

/// Folds particles sharing a leaf into the lowest-indexed one, which keeps
/// the summed weight (and summed per-depth weights); the others drop to zero.
pub fn dedup_merge(batch: &mut ParticleBatch) {
    let mut first: HashMap<NodeId, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in batch.particles.iter().enumerate() {
        match first.get(&p.leaf()) {
            Some(&g) => groups[g].push(i),
            None => {
                first.insert(p.leaf(), groups.len());
                groups.push(vec![i]);
            }
        }
    }
    for g in groups.into_iter().filter(|g| g.len() > 1) {
        let head = g[0];
        let mut weight = 0.0;
        let mut dw = vec![0.0; batch.particles[head].depth_weights.len()];
        let mut wv = 0.0;
        let v0 = batch.particles[head].leaf_value;
        let mut same_value = true;
        for &i in &g {
            let p = &batch.particles[i];
            weight += p.weight;
            wv += p.weight * p.leaf_value;
            same_value &= p.leaf_value == v0;
            for (d, w) in dw.iter_mut().zip(&p.depth_weights) {
                *d += w;
            }
        }
        let value = if same_value || weight == 0.0 { v0 } else { wv / weight };
        for &i in &g[1..] {
            let p = &mut batch.particles[i];
            p.weight = 0.0;
            p.depth_weights.iter_mut().for_each(|w| *w = 0.0);
            p.representative = false;
        }
        let h = &mut batch.particles[head];
        h.weight = weight;
        h.depth_weights = dw;
        h.leaf_value = value;
    }
}

/// Per-depth returns `nu[t] = r(path[t+1]) + c * nu[t+1]`, `nu[T] = leaf value`.
fn suffix_returns(tree: &SearchTree, p: &Particle) -> Vec<f64> {
    let c = tree.continuation();
    let depth = p.depth();
    let mut nu = vec![0.0; depth + 1];
    nu[depth] = p.leaf_value;
    for t in (0..depth).rev() {
        nu[t] = tree.node(p.path[t + 1]).reward + c * nu[t + 1];
    }
    nu
}

/// Nodes on the particle's path that backpropagation updates: everything
/// except a leaf created in this iteration.
fn updated_prefix(p: &Particle) -> usize {
    if p.new_leaf {
        p.depth()
    } else {
        p.depth() + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackpropStats {
    pub root_estimate: Option<f64>,
    pub root_mass_increment: f64,
    pub ess_root: f64,
    pub ess_min: f64,
    pub ess_mean: f64,
    pub skipped_nodes: usize,
}

fn returns_for(tree: &SearchTree, batch: &ParticleBatch, pool: Option<&rayon::ThreadPool>) -> Vec<Vec<f64>> {
    match pool {
        Some(pool) if batch.particles.len() > 1 => {
            pool.install(|| batch.particles.par_iter().map(|p| suffix_returns(tree, p)).collect())
        }
        _ => batch.particles.iter().map(|p| suffix_returns(tree, p)).collect(),
    }
}

/// Unweighted update: each node moves to the mean of the returns of the
/// `N(s)` particles through it, with update mass `N(s)`.
pub fn backprop_simple(tree: &mut SearchTree, batch: &ParticleBatch, pool: Option<&rayon::ThreadPool>) -> Result<BackpropStats> {
    let returns = returns_for(tree, batch, pool);
    let mut acc: BTreeMap<NodeId, (f64, usize)> = BTreeMap::new();
    for (p, nu) in batch.particles.iter().zip(&returns) {
        for t in 0..updated_prefix(p) {
            let e = acc.entry(p.path[t]).or_insert((0.0, 0));
            e.0 += nu[t];
            e.1 += 1;
        }
    }
    let mut stats = BackpropStats::default();
    let mut ess_sum = 0.0;
    let mut ess_min = f64::INFINITY;
    for (&id, &(sum, count)) in &acc {
        let n = count as f64;
        let nu = sum / n;
        let node = tree.node_mut(id);
        let (v, m) = stable_weighted_update(node.value, node.visit_mass, nu, n)?;
        node.value = v;
        node.visit_mass = m;
        ess_sum += n;
        ess_min = ess_min.min(n);
        if id == ROOT {
            stats.root_estimate = Some(nu);
            stats.root_mass_increment = n;
            stats.ess_root = n;
        }
    }
    if !acc.is_empty() {
        stats.ess_mean = ess_sum / acc.len() as f64;
        stats.ess_min = ess_min;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, Default)]
struct WeightedAcc {
    count: usize,
    unique: usize,
    sum_w: f64,
    sum_w2: f64,
    sum_wnu: f64,
}

/// Importance-weighted update.
///
/// The node estimate is `sum w nu / sum w` (self-normalized) or
/// `sum w nu / N(s)` (unnormalized, with per-depth weights if enabled). The
/// update mass is the effective sample size, the number of distinct
/// trajectories, or `N(s)`, depending on the configuration. Nodes whose
/// particles all carry zero weight are skipped.
pub fn backprop_weighted(
    tree: &mut SearchTree,
    batch: &ParticleBatch,
    cfg: &SearchConfig,
    pool: Option<&rayon::ThreadPool>,
) -> Result<BackpropStats> {
    let returns = returns_for(tree, batch, pool);
    let per_depth = cfg.estimator == Estimator::Unnormalized && cfg.per_depth_weights;
    let mut acc: BTreeMap<NodeId, WeightedAcc> = BTreeMap::new();
    for (p, nu) in batch.particles.iter().zip(&returns) {
        for t in 0..updated_prefix(p) {
            let w = if per_depth { p.depth_weights[t] } else { p.weight };
            let e = acc.entry(p.path[t]).or_default();
            e.count += 1;
            e.unique += usize::from(w > 0.0);
            e.sum_w += w;
            e.sum_w2 += w * w;
            e.sum_wnu += w * nu[t];
        }
    }
    let mut stats = BackpropStats::default();
    let mut ess_sum = 0.0;
    let mut ess_n = 0usize;
    let mut ess_min = f64::INFINITY;
    for (&id, e) in &acc {
        if e.sum_w == 0.0 {
            stats.skipped_nodes += 1;
            continue;
        }
        let nu = match cfg.estimator {
            Estimator::SelfNormalized => e.sum_wnu / e.sum_w,
            Estimator::Unnormalized => e.sum_wnu / e.count as f64,
        };
        let ess = e.sum_w * e.sum_w / e.sum_w2;
        let mass = if cfg.ess_weighting {
            ess
        } else if cfg.dedup {
            e.unique as f64
        } else {
            e.count as f64
        };
        let node = tree.node_mut(id);
        let (v, m) = stable_weighted_update(node.value, node.visit_mass, nu, mass)?;
        node.value = v;
        node.visit_mass = m;
        ess_sum += ess;
        ess_n += 1;
        ess_min = ess_min.min(ess);
        if id == ROOT {
            stats.root_estimate = Some(nu);
            stats.root_mass_increment = mass;
            stats.ess_root = ess;
        }
    }
    if ess_n > 0 {
        stats.ess_mean = ess_sum / ess_n as f64;
        stats.ess_min = ess_min;
    }
    Ok(stats)
}

/// Effective sample size of the batch weights at the root.
pub fn root_ess(batch: &ParticleBatch) -> f64 {
    let w: Vec<f64> = batch.particles.iter().map(|p| p.weight).collect();
    effective_sample_size(&w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(index: usize, leaf: NodeId, weight: f64) -> Particle {
        let mut p = Particle::new(index);
        p.path.push(leaf);
        p.actions.push(0);
        p.weight = weight;
        p.depth_weights = vec![weight, 1.0];
        p
    }

    #[test]
    fn merge_examples() {
        let mut b = ParticleBatch {
            iteration: 0,
            particles: vec![particle(0, 1, 0.4), particle(1, 2, 0.1), particle(2, 1, 0.6)],
        };
        dedup_merge(&mut b);
        let w: Vec<f64> = b.particles.iter().map(|p| p.weight).collect();
        assert_eq!(w, vec![1.0, 0.1, 0.0]);
        assert!(!b.particles[2].representative);
        assert_eq!(b.particles[0].depth_weights, vec![1.0, 2.0]);

        let mut all = ParticleBatch {
            iteration: 0,
            particles: vec![particle(0, 3, 0.2), particle(1, 3, 0.3), particle(2, 3, 0.5)],
        };
        dedup_merge(&mut all);
        assert_eq!(all.particles[0].weight, 1.0);
        assert_eq!(all.particles[1].weight + all.particles[2].weight, 0.0);

        let mut unique = ParticleBatch {
            iteration: 0,
            particles: vec![particle(0, 1, 0.2), particle(1, 2, 0.3)],
        };
        let before = unique.clone();
        dedup_merge(&mut unique);
        assert_eq!(unique, before);
    }
}
