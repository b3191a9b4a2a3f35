//! Round-by-round simulation driver.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::latency::{energy_step, fixed_and_marginal, StepBreakdown};
use crate::models::{bernoulli_pair, train_draft, Corpus, DraftModel, SyntheticTarget, TargetModel};
use crate::policy::{fixed_decision, select_k, AcceptanceEstimator, Policy, PolicyDecision};
use crate::protocol::{run_cloud_only_round, run_round, KvSession};
use crate::scalar::Scalar;
use crate::Token;

use super::metrics::Metrics;
use super::scenario::{DraftSpec, ModelSpec, Scenario};

/// Everything one round left behind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord<T> {
    /// Round index, starting at 0.
    pub round: u64,
    /// Uplink rate sampled for this round (bits/s).
    pub rate: T,
    /// Stride drafted (0 on cloud-only rounds).
    pub k: u32,
    pub tau: u32,
    pub breakdown: StepBreakdown<T>,
    pub energy_j: T,
    /// EMA acceptance estimate after this round's update.
    pub gamma_hat: T,
    pub fallback: bool,
}

/// Result of one simulation.
#[derive(Debug, Clone)]
pub struct SimOutput<T> {
    pub records: Vec<RoundRecord<T>>,
    pub metrics: Metrics<T>,
    pub prompt: Vec<Token>,
    /// Tokens committed after the prompt, in order.
    pub committed: Vec<Token>,
}

/// The materialized draft/target pair a simulation runs against.
pub(crate) enum Pair<T> {
    Bernoulli { draft: crate::models::BernoulliDraft, target: SyntheticTarget },
    Toy { draft: DraftModel<T>, target: TargetModel<T> },
}

const SALT_PROMPT: u64 = 0x5EED_0001;
const SALT_MODEL: u64 = 0x5EED_0002;

fn mix(seed: u64, salt: u64) -> u64 {
    let mut x = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn build_pair<T: Scalar>(spec: &ModelSpec<T>, seed: u64) -> Result<Pair<T>> {
    match spec {
        ModelSpec::Bernoulli { p, vocab } => {
            let (draft, target) = bernoulli_pair(*p, *vocab, mix(seed, SALT_MODEL))?;
            Ok(Pair::Bernoulli { draft, target })
        }
        ModelSpec::Anchored { family, magnitude, task_seed, draft } => {
            let base = TargetModel::base(family)?;
            let draft = match draft {
                DraftSpec::Untrained { head_seed } => DraftModel::untrained(&base, *head_seed),
                DraftSpec::Trained { config, corpus } => {
                    let corpus = Corpus::markov(family.vocab, corpus.sequences, corpus.len, corpus.seed)?;
                    train_draft(&base, &corpus, config)?.0
                }
                DraftSpec::Provided(d) => d.clone(),
            };
            let target = if *magnitude > T::zero() {
                base.fine_tune(*magnitude, *task_seed)?
            } else {
                base
            };
            Ok(Pair::Toy { draft, target })
        }
    }
}

pub(crate) fn random_prompt(vocab: usize, len: usize, seed: u64) -> Vec<Token> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, SALT_PROMPT));
    (0..len).map(|_| rng.gen_range(0..vocab) as Token).collect()
}

/// Runs a scenario to its token budget. Deterministic for a fixed
/// `(scenario, seed)`: the channel realization comes from the channel spec,
/// the prompt and any synthetic-model randomness from the run seed.
pub fn simulate<T: Scalar>(scenario: &Scenario<T>, seed: u64) -> Result<SimOutput<T>> {
    scenario.validate()?;
    let mut channel = scenario.channel.build()?;
    let mut pair = build_pair(&scenario.model, seed)?;
    let prompt = random_prompt(scenario.model.vocab(), scenario.prompt_len, seed);

    let mut estimator = AcceptanceEstimator::new(scenario.policy.gamma0, scenario.policy.mu)?;
    let session_id = (mix(seed, 0x1D) & 0xFFFF_FFFF) as u32;
    let mut session: KvSession<T> = KvSession::new(session_id);
    match &pair {
        Pair::Bernoulli { target, .. } => session.seed_prompt(target, &prompt)?,
        Pair::Toy { target, .. } => session.seed_prompt(target, &prompt)?,
    }
    let mut edge_ctx = prompt.clone();

    let mut records: Vec<RoundRecord<T>> = Vec::new();
    let mut t_sim = T::zero();
    let mut emitted_total: u64 = 0;
    let mut round: u64 = 0;

    while emitted_total < scenario.budget_tokens {
        let fail = |round: u64, e: Error| Error::Simulation { round, source: Box::new(e) };
        let rate = channel.sample(t_sim);
        let (t_fixed, t_marginal) =
            fixed_and_marginal(rate, &scenario.latency).map_err(|e| fail(round, e))?;

        let policy = scenario.policy.policy;
        let (outcome, breakdown, decision) = match policy {
            Policy::CloudOnly => {
                let (outcome, breakdown) = match &mut pair {
                    Pair::Bernoulli { target, .. } => run_cloud_only_round(
                        &mut edge_ctx, target, &mut session, rate, &scenario.latency,
                    ),
                    Pair::Toy { target, .. } => run_cloud_only_round(
                        &mut edge_ctx, target, &mut session, rate, &scenario.latency,
                    ),
                }
                .map_err(|e| fail(round, e))?;
                (outcome, breakdown, None)
            }
            Policy::Adaptive | Policy::Fixed(_) => {
                let decision: PolicyDecision<T> = match policy {
                    Policy::Adaptive => select_k(&estimator, t_fixed, t_marginal, &scenario.policy.config),
                    Policy::Fixed(k) => {
                        fixed_decision(k, &estimator, t_fixed, t_marginal, &scenario.policy.config)
                    }
                    Policy::CloudOnly => unreachable!(),
                }
                .map_err(|e| fail(round, e))?;
                let (outcome, breakdown) = match &mut pair {
                    Pair::Bernoulli { draft, target } => run_round(
                        draft, &mut edge_ctx, target, &mut session, decision.k, rate, &scenario.latency,
                    ),
                    Pair::Toy { draft, target } => run_round(
                        draft, &mut edge_ctx, target, &mut session, decision.k, rate, &scenario.latency,
                    ),
                }
                .map_err(|e| fail(round, e))?;
                estimator
                    .update(outcome.tau, outcome.k_used)
                    .map_err(|e| fail(round, e))?;
                (outcome, breakdown, Some(decision))
            }
        };

        let energy = energy_step(&breakdown, &scenario.power);
        records.push(RoundRecord {
            round,
            rate,
            k: outcome.k_used,
            tau: outcome.tau,
            breakdown,
            energy_j: energy.total,
            gamma_hat: estimator.gamma_hat(),
            fallback: decision.map(|d| d.fallback_engaged).unwrap_or(false),
        });
        emitted_total += outcome.emitted.len() as u64;
        t_sim += breakdown.t_total;
        round += 1;
    }

    let metrics = Metrics::from_records(&records, &scenario.power)?;
    let committed = edge_ctx[prompt.len()..].to_vec();
    Ok(SimOutput { records, metrics, prompt, committed })
}

/// Greedy decode of the scenario's target alone; the losslessness oracle.
pub fn target_only_decode<T: Scalar>(
    scenario: &Scenario<T>,
    seed: u64,
    n: usize,
) -> Result<Vec<Token>> {
    let pair = build_pair(&scenario.model, seed)?;
    let prompt = random_prompt(scenario.model.vocab(), scenario.prompt_len, seed);
    match &pair {
        Pair::Bernoulli { target, .. } => {
            crate::protocol::greedy_decode::<T>(target, &prompt, n)
        }
        Pair::Toy { target, .. } => crate::protocol::greedy_decode::<T>(target, &prompt, n),
    }
}
