//! Arena-allocated search tree.
//!
//! Nodes live in a vector reserved up front for the whole search, so node
//! indices are stable. Action values are never stored: `q(s, a)` is derived
//! from the child as `r + c * v(child)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::mdp::{ActionId, MdpModel, StateId};

pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub state: StateId,
    pub parent: Option<NodeId>,
    pub action: Option<ActionId>,
    pub depth: usize,
    /// Reward on the edge into this node.
    pub reward: f64,
    /// The edge into this node ended the episode; the node has value 0 forever.
    pub terminal: bool,
    pub prior: Vec<f64>,
    /// Evaluator value at creation (`v_phi`).
    pub prior_value: f64,
    pub value: f64,
    pub visit_mass: f64,
    pub children: Vec<Option<NodeId>>,
}

impl Node {
    pub fn is_expanded(&self) -> bool {
        !self.terminal
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    capacity: usize,
    continuation: f64,
}

impl SearchTree {
    pub fn new(root: Node, capacity: usize, continuation: f64) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::Validation("tree capacity must be at least 1".into()));
        }
        let mut nodes = Vec::with_capacity(capacity);
        nodes.push(root);
        Ok(Self {
            nodes,
            capacity,
            continuation,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn continuation(&self) -> f64 {
        self.continuation
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn child(&self, id: NodeId, action: ActionId) -> Option<NodeId> {
        self.nodes[id].children[action]
    }

    /// Appends a node under `parent` via `action`.
    pub fn add_child(&mut self, parent: NodeId, action: ActionId, mut node: Node) -> Result<NodeId> {
        if self.nodes.len() >= self.capacity {
            return Err(Error::Capacity {
                capacity: self.capacity,
            });
        }
        if self.nodes[parent].children[action].is_some() {
            return Err(Error::Validation(format!("edge ({parent}, {action}) already expanded")));
        }
        let id = self.nodes.len();
        node.parent = Some(parent);
        node.action = Some(action);
        node.depth = self.nodes[parent].depth + 1;
        self.nodes.push(node);
        self.nodes[parent].children[action] = Some(id);
        Ok(id)
    }

    /// Per-action visit mass `M(s, a)`; zero for unexpanded edges.
    pub fn child_masses(&self, id: NodeId) -> Vec<f64> {
        self.nodes[id]
            .children
            .iter()
            .map(|c| c.map_or(0.0, |c| self.nodes[c].visit_mass))
            .collect()
    }

    /// `q(s, a)` for visited actions, `None` otherwise.
    pub fn q_values(&self, id: NodeId) -> Vec<Option<f64>> {
        self.nodes[id]
            .children
            .iter()
            .map(|c| {
                c.and_then(|c| {
                    let n = &self.nodes[c];
                    (n.visit_mass > 0.0).then(|| n.reward + self.continuation * n.value)
                })
            })
            .collect()
    }

    /// Line per node: `index parent action M v r`, with `-` for the root's missing links.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let action = n.action.map_or("-".to_string(), |a| a.to_string());
            let _ = writeln!(
                out,
                "{i} {parent} {action} {} {} {}",
                n.visit_mass, n.value, n.reward
            );
        }
        out
    }
}

/// Builds a node for `state` before it is linked into a tree.
pub fn leaf_node(state: StateId, action_count: usize, reward: f64, terminal: bool, prior: Vec<f64>, value: f64) -> Node {
    Node {
        state,
        parent: None,
        action: None,
        depth: 0,
        reward,
        terminal,
        prior,
        prior_value: value,
        value,
        visit_mass: 1.0,
        children: vec![None; if terminal { 0 } else { action_count }],
    }
}

/// Tree holding only the evaluated root.
pub fn init_tree(
    model: &dyn MdpModel,
    evaluator: &dyn Evaluator,
    root_state: StateId,
    capacity: usize,
    draw: u64,
) -> Result<SearchTree> {
    if capacity < 1 {
        return Err(Error::Validation("tree capacity must be at least 1".into()));
    }
    let eval = evaluator.evaluate(root_state, draw)?;
    let n = model.action_count(root_state);
    if eval.prior.len() != n {
        return Err(Error::Validation(format!(
            "evaluator prior has {} entries, state {root_state} has {n} actions",
            eval.prior.len()
        )));
    }
    let root = leaf_node(root_state, n, 0.0, false, eval.prior, eval.value);
    SearchTree::new(root, capacity, model.continuation())
}

/// Visited actions keep their `q`; unvisited ones get `v_mix`.
///
/// `v_mix = (v_phi + (sum_b M(b) / sum_{visited} pi(b)) * sum_{visited} pi(b) q(b)) / (1 + sum_b M(b))`.
pub fn completed_q(tree: &SearchTree, id: NodeId, v_phi: f64) -> Vec<f64> {
    let node = tree.node(id);
    let q = tree.q_values(id);
    let masses = tree.child_masses(id);
    let mut sum_m = 0.0;
    let mut sum_p = 0.0;
    let mut sum_pq = 0.0;
    for a in 0..q.len() {
        if let Some(qa) = q[a] {
            sum_m += masses[a];
            sum_p += node.prior[a];
            sum_pq += node.prior[a] * qa;
        }
    }
    let v_mix = if sum_m > 0.0 && sum_p > 0.0 {
        (v_phi + sum_m / sum_p * sum_pq) / (1.0 + sum_m)
    } else {
        v_phi
    };
    q.iter().map(|x| x.unwrap_or(v_mix)).collect()
}

/// Mass-weighted running mean: `v + (nu - v) * m / (M + m)`.
pub fn stable_weighted_update(old_value: f64, old_mass: f64, new_estimate: f64, new_mass: f64) -> Result<(f64, f64)> {
    if !(old_mass >= 0.0 && new_mass >= 0.0) {
        return Err(Error::Validation("masses must be non-negative".into()));
    }
    let total = old_mass + new_mass;
    if total == 0.0 {
        return Err(Error::Validation("cannot update with zero total mass".into()));
    }
    if new_mass == 0.0 {
        return Ok((old_value, old_mass));
    }
    if old_mass == 0.0 {
        return Ok((new_estimate, new_mass));
    }
    Ok((old_value + (new_estimate - old_value) * new_mass / total, total))
}
