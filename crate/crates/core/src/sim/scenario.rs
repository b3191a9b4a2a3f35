//! Declarative simulation scenarios.
//!
//! A scenario is data, not state: channels and models are specs that the
//! engine materializes per run, so two simulations of the same scenario and
//! seed replay identical randomness (and policy sweeps see common random
//! numbers).

use crate::channel::{ChannelModel, ChannelTrace, GilbertElliott, GilbertElliottParams};
use crate::error::{Error, Result};
use crate::latency::{LatencyParams, PowerParams};
use crate::models::{DraftModel, FamilyConfig, TrainingConfig};
use crate::policy::{Policy, PolicyConfig};
use crate::scalar::Scalar;

/// Where the corpus for on-the-fly draft training comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub sequences: usize,
    pub len: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { sequences: 5000, len: 32, seed: 0xC0 }
    }
}

/// How the edge draft of an anchored scenario is obtained.
#[derive(Debug, Clone)]
pub enum DraftSpec<T> {
    /// Random head, no training. Cheap, low acceptance.
    Untrained { head_seed: u64 },
    /// Distill the head against the base target before simulating.
    Trained { config: TrainingConfig<T>, corpus: CorpusSpec },
    /// An already-built draft (e.g. loaded from a checkpoint).
    Provided(DraftModel<T>),
}

/// Which model pair the rounds run against.
#[derive(Debug, Clone)]
pub enum ModelSpec<T> {
    /// Synthetic pair with ground-truth agreement probability `p`.
    Bernoulli { p: f64, vocab: usize },
    /// The toy anchored family, fine-tuned to `magnitude` (0 keeps the base).
    Anchored { family: FamilyConfig, magnitude: T, task_seed: u64, draft: DraftSpec<T> },
}

impl<T: Scalar> ModelSpec<T> {
    pub fn vocab(&self) -> usize {
        match self {
            ModelSpec::Bernoulli { vocab, .. } => *vocab,
            ModelSpec::Anchored { family, .. } => family.vocab,
        }
    }
}

/// Channel specification; materialized fresh for every simulation run.
#[derive(Debug, Clone)]
pub enum ChannelSpec<T> {
    Constant(T),
    Trace(ChannelTrace<T>),
    Gilbert(GilbertElliottParams<T>),
}

impl<T: Scalar> ChannelSpec<T> {
    pub fn build(&self) -> Result<ChannelModel<T>> {
        match self {
            ChannelSpec::Constant(r) => {
                if !(*r > T::zero()) || !r.is_finite() {
                    return Err(Error::Config(format!("constant rate must be > 0, got {r}")));
                }
                Ok(ChannelModel::Constant(*r))
            }
            ChannelSpec::Trace(t) => Ok(ChannelModel::Trace(t.clone())),
            ChannelSpec::Gilbert(p) => Ok(ChannelModel::Gilbert(GilbertElliott::new(*p)?)),
        }
    }
}

/// Stride policy plus its estimator initialization.
#[derive(Debug, Clone, Copy)]
pub struct PolicySpec<T> {
    pub policy: Policy,
    pub config: PolicyConfig<T>,
    /// Initial EMA acceptance estimate.
    pub gamma0: T,
    /// EMA decay.
    pub mu: T,
}

impl<T: Scalar> Default for PolicySpec<T> {
    fn default() -> Self {
        Self {
            policy: Policy::Adaptive,
            config: PolicyConfig::default(),
            gamma0: T::cast(crate::policy::GAMMA0_DEFAULT),
            mu: T::cast(crate::policy::MU_DEFAULT),
        }
    }
}

/// Everything one simulation needs, minus the run seed.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub model: ModelSpec<T>,
    pub channel: ChannelSpec<T>,
    pub latency: LatencyParams<T>,
    pub power: PowerParams<T>,
    pub policy: PolicySpec<T>,
    /// The run ends once this many tokens have been committed.
    pub budget_tokens: u64,
    pub prompt_len: usize,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.latency.validate()?;
        self.power.validate()?;
        self.policy.config.validate()?;
        if self.budget_tokens < 1 {
            return Err(Error::Config("token budget must be >= 1".into()));
        }
        if self.prompt_len < 1 {
            return Err(Error::Config("prompt length must be >= 1".into()));
        }
        let vocab = self.model.vocab();
        if vocab < 2 {
            return Err(Error::Config(format!("vocab must be >= 2, got {vocab}")));
        }
        // A token index must fit the wire width the latency model charges for.
        let needed_bits = (usize::BITS - (vocab - 1).leading_zeros()) as f64;
        if self.latency.token_bits.as_f64() < needed_bits {
            return Err(Error::Config(format!(
                "token_bits {} cannot index a vocabulary of {vocab}",
                self.latency.token_bits
            )));
        }
        match &self.model {
            ModelSpec::Bernoulli { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("bernoulli p must be in [0, 1], got {p}")));
                }
            }
            ModelSpec::Anchored { family, magnitude, draft, .. } => {
                family.validate()?;
                if !magnitude.is_finite() || *magnitude < T::zero() {
                    return Err(Error::Config(format!(
                        "fine-tune magnitude must be >= 0, got {magnitude}"
                    )));
                }
                if let DraftSpec::Trained { config, corpus } = draft {
                    config.validate()?;
                    if corpus.sequences == 0 || corpus.len < 2 {
                        return Err(Error::Config("corpus spec must have sequences >= 1, len >= 2".into()));
                    }
                }
            }
        }
        match &self.channel {
            ChannelSpec::Constant(r) => {
                if !(*r > T::zero()) {
                    return Err(Error::Config(format!("constant rate must be > 0, got {r}")));
                }
            }
            ChannelSpec::Gilbert(p) => p.validate()?,
            ChannelSpec::Trace(_) => {} // validated at construction
        }
        Ok(())
    }
}
