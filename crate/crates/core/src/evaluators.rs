//! Sources of the prior policy and leaf value used by every search.
//!
//! An evaluator receives a `draw` key alongside the state. Stochastic
//! evaluators derive their noise from it, so the caller decides which
//! evaluations are independent and which are shared.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, StateId};
use crate::oracle::{self, TabularPolicy};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Exact,
    NoisyUnbiased,
    DeterministicBiased,
    Rollout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub prior: Vec<f64>,
    pub value: f64,
}

pub trait Evaluator: Send + Sync {
    fn kind(&self) -> EvaluatorKind;

    fn evaluate(&self, state: StateId, draw: u64) -> Result<Evaluation>;

    /// Evaluates a batch; element `i` equals `evaluate(requests[i].0, requests[i].1)`.
    fn batch_evaluate(&self, requests: &[(StateId, u64)]) -> Result<Vec<Evaluation>> {
        requests.iter().map(|&(s, d)| self.evaluate(s, d)).collect()
    }
}

/// Values clipped to this many standard deviations.
pub const NOISE_CLIP: f64 = 6.0;

/// Prior table plus `V^{prior}` reference, optionally perturbed.
#[derive(Debug, Clone)]
pub struct TabularEvaluator {
    kind: EvaluatorKind,
    prior: Arc<TabularPolicy>,
    reference: Arc<Vec<f64>>,
    offsets: Option<Arc<Vec<f64>>>,
    sigma: f64,
    seed: u64,
    evaluator_id: u64,
}

impl TabularEvaluator {
    pub fn reference_value(&self, state: StateId) -> f64 {
        self.reference[state]
    }

    pub fn prior_policy(&self) -> &TabularPolicy {
        &self.prior
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn offset(&self, state: StateId) -> f64 {
        self.offsets.as_ref().map_or(0.0, |o| o[state])
    }

    /// Distinguishes independent evaluators built from the same seed.
    pub fn with_evaluator_id(mut self, id: u64) -> Self {
        self.evaluator_id = id;
        self
    }

    fn noise(&self, draw: u64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let mut r = rng::stream(rng::key(&[self.seed, tag::EVAL, self.evaluator_id, draw]));
        let z: f64 = r.sample(StandardNormal);
        self.sigma * z.clamp(-NOISE_CLIP, NOISE_CLIP)
    }
}

impl Evaluator for TabularEvaluator {
    fn kind(&self) -> EvaluatorKind {
        self.kind
    }

    fn evaluate(&self, state: StateId, draw: u64) -> Result<Evaluation> {
        let row = self.prior.rows.get(state).ok_or(Error::Range {
            index: state,
            max: self.prior.rows.len().saturating_sub(1),
        })?;
        let value = self.reference[state] + self.offset(state) + self.noise(draw);
        Ok(Evaluation {
            prior: row.clone(),
            value,
        })
    }
}

fn reference(model: &dyn MdpModel, prior: &TabularPolicy) -> Result<Arc<Vec<f64>>> {
    Ok(Arc::new(oracle::policy_evaluation(model, prior, oracle::DEFAULT_TOL)?.v))
}

/// Returns `V^{prior}(s)` exactly.
pub fn make_exact_evaluator(model: &dyn MdpModel, prior: TabularPolicy) -> Result<TabularEvaluator> {
    make_noisy_evaluator(model, prior, 0.0, 0).map(|mut e| {
        e.kind = EvaluatorKind::Exact;
        e
    })
}

/// `V^{prior}(s)` plus independent clipped Gaussian noise of scale `sigma` per draw.
pub fn make_noisy_evaluator(
    model: &dyn MdpModel,
    prior: TabularPolicy,
    sigma: f64,
    seed: u64,
) -> Result<TabularEvaluator> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Validation(format!("sigma {sigma} must be finite and >= 0")));
    }
    prior.validate(model)?;
    let reference = reference(model, &prior)?;
    Ok(TabularEvaluator {
        kind: EvaluatorKind::NoisyUnbiased,
        prior: Arc::new(prior),
        reference,
        offsets: None,
        sigma,
        seed,
        evaluator_id: 0,
    })
}

/// `V^{prior}(s)` plus a fixed per-state offset in `[-bias_scale, bias_scale]`.
pub fn make_biased_evaluator(
    model: &dyn MdpModel,
    prior: TabularPolicy,
    bias_scale: f64,
    seed: u64,
) -> Result<TabularEvaluator> {
    if !(bias_scale >= 0.0 && bias_scale.is_finite()) {
        return Err(Error::Validation(format!("bias_scale {bias_scale} must be finite and >= 0")));
    }
    prior.validate(model)?;
    let reference = reference(model, &prior)?;
    let offsets = (0..model.state_count())
        .map(|s| bias_scale * (2.0 * rng::unit(rng::key(&[seed, tag::EVAL, s as u64])) - 1.0))
        .collect();
    Ok(TabularEvaluator {
        kind: EvaluatorKind::DeterministicBiased,
        prior: Arc::new(prior),
        reference,
        offsets: Some(Arc::new(offsets)),
        sigma: 0.0,
        seed,
        evaluator_id: 0,
    })
}

/// Mean of `rollouts` discounted returns under `policy`, truncated with zero bootstrap.
#[derive(Clone)]
pub struct RolloutEvaluator {
    model: Arc<dyn MdpModel>,
    policy: Arc<TabularPolicy>,
    rollouts: usize,
    max_depth: usize,
    seed: u64,
}

impl RolloutEvaluator {
    pub fn new(
        model: Arc<dyn MdpModel>,
        policy: TabularPolicy,
        rollouts: usize,
        max_depth: usize,
        seed: u64,
    ) -> Result<Self> {
        if rollouts == 0 {
            return Err(Error::Validation("rollout evaluator needs at least one rollout".into()));
        }
        policy.validate(model.as_ref())?;
        Ok(Self {
            model,
            policy: Arc::new(policy),
            rollouts,
            max_depth,
            seed,
        })
    }

    pub fn rollout_value(&self, state: StateId, draw: u64) -> f64 {
        let c = self.model.continuation();
        let mut total = 0.0;
        for k in 0..self.rollouts {
            let mut s = state;
            let mut ret = 0.0;
            let mut scale = 1.0;
            for d in 0..self.max_depth {
                let u = rng::unit(rng::key(&[self.seed, tag::EVAL, draw, k as u64, d as u64]));
                let a = crate::policies::sample_index(self.policy.row(s), u);
                let t = self.model.transition(s, a);
                ret += scale * t.reward;
                if t.terminal {
                    break;
                }
                scale *= c;
                s = t.next_state;
            }
            total += ret;
        }
        total / self.rollouts as f64
    }
}

impl Evaluator for RolloutEvaluator {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::Rollout
    }

    fn evaluate(&self, state: StateId, draw: u64) -> Result<Evaluation> {
        Ok(Evaluation {
            prior: self.policy.row(state).to_vec(),
            value: self.rollout_value(state, draw),
        })
    }
}

/// Wraps an evaluator and counts evaluated states and batch calls.
pub struct CountingEvaluator {
    inner: Arc<dyn Evaluator>,
    states: AtomicUsize,
    batches: AtomicUsize,
}

impl CountingEvaluator {
    pub fn new(inner: Arc<dyn Evaluator>) -> Self {
        Self {
            inner,
            states: AtomicUsize::new(0),
            batches: AtomicUsize::new(0),
        }
    }

    pub fn states(&self) -> usize {
        self.states.load(Ordering::SeqCst)
    }

    pub fn batches(&self) -> usize {
        self.batches.load(Ordering::SeqCst)
    }
}

impl Evaluator for CountingEvaluator {
    fn kind(&self) -> EvaluatorKind {
        self.inner.kind()
    }

    fn evaluate(&self, state: StateId, draw: u64) -> Result<Evaluation> {
        self.states.fetch_add(1, Ordering::SeqCst);
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(state, draw)
    }

    fn batch_evaluate(&self, requests: &[(StateId, u64)]) -> Result<Vec<Evaluation>> {
        self.states.fetch_add(requests.len(), Ordering::SeqCst);
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.inner.batch_evaluate(requests)
    }
}
