//! Oracle access to generative models.
//!
//! Consensus sampling only ever touches a model through two calls: draw a
//! sample, or report the log-probability of a candidate outcome. Enumerable
//! oracles may additionally expose their exact distribution, which the exact
//! analysis routines and the unbounded sampler rely on.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::RngCore;

use super::distribution::FiniteDistribution;
use super::space::{Outcome, OutcomeShape};
use super::token::TokenModel;
use crate::error::{Error, Result};

pub trait GenerativeOracle: Send + Sync {
    fn shape(&self) -> OutcomeShape;

    /// One sample, using only the caller's randomness.
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Outcome>;

    /// Base-2 log-probability; `-inf` exactly for zero-mass outcomes.
    fn log_prob(&self, outcome: &Outcome) -> Result<f64>;

    /// The full distribution, indexed by [`OutcomeShape::index_of`].
    fn exact_view(&self) -> Option<FiniteDistribution> {
        None
    }
}

/// Oracle backed by an explicit probability vector.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    dist: FiniteDistribution,
    log_mass: Vec<f64>,
}

impl ExactOracle {
    pub fn new(dist: FiniteDistribution) -> Self {
        let log_mass = dist.mass().iter().map(|p| p.log2()).collect();
        Self { dist, log_mass }
    }

    pub fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }
}

/// Wraps an exact distribution as an oracle.
pub fn oracle_from_exact(p: FiniteDistribution) -> ExactOracle {
    ExactOracle::new(p)
}

impl GenerativeOracle for ExactOracle {
    fn shape(&self) -> OutcomeShape {
        OutcomeShape::Flat {
            size: self.dist.len(),
        }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Result<Outcome> {
        Ok(Outcome::Index(self.dist.sample(rng)))
    }

    fn log_prob(&self, outcome: &Outcome) -> Result<f64> {
        match outcome {
            Outcome::Index(i) if *i < self.log_mass.len() => Ok(self.log_mass[*i]),
            other => Err(Error::OutcomeOutOfRange(other.to_string())),
        }
    }

    fn exact_view(&self) -> Option<FiniteDistribution> {
        Some(self.dist.clone())
    }
}

impl GenerativeOracle for TokenModel {
    fn shape(&self) -> OutcomeShape {
        TokenModel::shape(self)
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Result<Outcome> {
        Ok(Outcome::Sequence(self.sample(rng)))
    }

    fn log_prob(&self, outcome: &Outcome) -> Result<f64> {
        super::token::token_model_prob(self, outcome)
    }

    fn exact_view(&self) -> Option<FiniteDistribution> {
        self.enumerate()
    }
}

/// Counts every oracle call passing through it.
pub struct CountingOracle {
    inner: Arc<dyn GenerativeOracle>,
    draws: AtomicU64,
    queries: AtomicU64,
}

impl CountingOracle {
    pub fn new(inner: Arc<dyn GenerativeOracle>) -> Self {
        Self {
            inner,
            draws: AtomicU64::new(0),
            queries: AtomicU64::new(0),
        }
    }

    pub fn draws(&self) -> u64 {
        self.draws.load(Ordering::Relaxed)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn calls(&self) -> u64 {
        self.draws() + self.queries()
    }

    pub fn reset(&self) {
        self.draws.store(0, Ordering::Relaxed);
        self.queries.store(0, Ordering::Relaxed);
    }
}

impl fmt::Debug for CountingOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CountingOracle")
            .field("draws", &self.draws())
            .field("queries", &self.queries())
            .finish()
    }
}

impl GenerativeOracle for CountingOracle {
    fn shape(&self) -> OutcomeShape {
        self.inner.shape()
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Result<Outcome> {
        self.draws.fetch_add(1, Ordering::Relaxed);
        self.inner.draw(rng)
    }

    fn log_prob(&self, outcome: &Outcome) -> Result<f64> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.log_prob(outcome)
    }

    fn exact_view(&self) -> Option<FiniteDistribution> {
        self.inner.exact_view()
    }
}

/// `k` oracles over one outcome shape, together with the number `s` of
/// members assumed safe. Which members are safe is never known here.
#[derive(Clone)]
pub struct Ensemble {
    members: Vec<Arc<dyn GenerativeOracle>>,
    s: usize,
    shape: OutcomeShape,
}

impl Ensemble {
    pub fn new(members: Vec<Arc<dyn GenerativeOracle>>, s: usize) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidEnsemble("no members".into()))?;
        let shape = first.shape();
        if s == 0 || s > members.len() {
            return Err(Error::InvalidEnsemble(format!(
                "s = {s} must lie in 1..={}",
                members.len()
            )));
        }
        if let Some((i, m)) = members.iter().enumerate().find(|(_, m)| m.shape() != shape) {
            return Err(Error::SpaceMismatch {
                expected: shape.to_string(),
                found: format!("member {i}: {}", m.shape()),
            });
        }
        Ok(Self { members, s, shape })
    }

    /// Ensemble of exact oracles over the given distributions.
    pub fn from_distributions(distributions: &[FiniteDistribution], s: usize) -> Result<Self> {
        let members = distributions
            .iter()
            .map(|d| Arc::new(ExactOracle::new(d.clone())) as Arc<dyn GenerativeOracle>)
            .collect();
        Self::new(members, s)
    }

    pub fn members(&self) -> &[Arc<dyn GenerativeOracle>] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// `a = k - s`, the number of arbitrary members.
    pub fn arbitrary(&self) -> usize {
        self.k() - self.s
    }

    pub fn shape(&self) -> OutcomeShape {
        self.shape
    }

    /// Exact distributions of all members, if every member has one.
    pub fn exact_views(&self) -> Option<Vec<FiniteDistribution>> {
        self.members.iter().map(|m| m.exact_view()).collect()
    }
}

impl fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ensemble")
            .field("k", &self.k())
            .field("s", &self.s)
            .field("shape", &self.shape)
            .finish()
    }
}

/// A model conditioned on a prompt: resolving it yields an ordinary oracle.
pub trait PromptedOracle: Send + Sync {
    fn prompt_count(&self) -> usize;
    fn resolve(&self, prompt: usize) -> Result<Arc<dyn GenerativeOracle>>;
}

/// One oracle per prompt.
#[derive(Clone)]
pub struct PromptTable {
    per_prompt: Vec<Arc<dyn GenerativeOracle>>,
}

impl PromptTable {
    pub fn new(per_prompt: Vec<Arc<dyn GenerativeOracle>>) -> Result<Self> {
        let first = per_prompt
            .first()
            .ok_or_else(|| Error::InvalidEnsemble("prompt table is empty".into()))?;
        let shape = first.shape();
        if per_prompt.iter().any(|o| o.shape() != shape) {
            return Err(Error::SpaceMismatch {
                expected: shape.to_string(),
                found: "mixed shapes across prompts".into(),
            });
        }
        Ok(Self { per_prompt })
    }

    pub fn from_distributions(per_prompt: &[FiniteDistribution]) -> Result<Self> {
        Self::new(
            per_prompt
                .iter()
                .map(|d| Arc::new(ExactOracle::new(d.clone())) as Arc<dyn GenerativeOracle>)
                .collect(),
        )
    }
}

impl PromptedOracle for PromptTable {
    fn prompt_count(&self) -> usize {
        self.per_prompt.len()
    }

    fn resolve(&self, prompt: usize) -> Result<Arc<dyn GenerativeOracle>> {
        self.per_prompt
            .get(prompt)
            .cloned()
            .ok_or_else(|| Error::OutcomeOutOfRange(format!("prompt {prompt}")))
    }
}
