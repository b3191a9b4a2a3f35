//! Comparative experiments: policy sweeps, the stride/rate landscape, and
//! acceptance under target evolution.

use crate::error::{Error, Result};
use crate::latency::LatencyParams;
use crate::models::{
    measure_acceptance, train_draft, train_unanchored, Corpus, DraftModel, FamilyConfig,
    TargetModel, TrainingConfig, UnanchoredDraft,
};
use crate::policy::{expected_accepted, AcceptanceModel, Policy};
use crate::scalar::Scalar;
use crate::Token;

use super::engine::simulate;
use super::metrics::Metrics;
use super::scenario::{DraftSpec, ModelSpec, Scenario};

/// One policy's aggregate outcome in a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow<T> {
    pub policy: Policy,
    pub label: String,
    pub metrics: Metrics<T>,
}

/// Simulates the scenario once per fixed stride (plus optionally the
/// adaptive policy) under common random numbers: every row sees the same
/// run seed, hence the same channel realization and model randomness, and
/// differs only through its stride decisions.
pub fn sweep_k<T: Scalar>(
    scenario: &Scenario<T>,
    k_values: &[u32],
    include_adaptive: bool,
    seed: u64,
) -> Result<Vec<SweepRow<T>>> {
    if k_values.is_empty() && !include_adaptive {
        return Err(Error::Config("sweep needs at least one stride or the adaptive policy".into()));
    }
    // Resolve on-the-fly training once so every row reuses the same draft.
    let mut base_scenario = scenario.clone();
    if let ModelSpec::Anchored { family, draft: draft_spec @ DraftSpec::Trained { .. }, .. } =
        &mut base_scenario.model
    {
        let DraftSpec::Trained { config, corpus } = draft_spec else { unreachable!() };
        let base = TargetModel::base(family)?;
        let corpus = Corpus::markov(family.vocab, corpus.sequences, corpus.len, corpus.seed)?;
        let (trained, _) = train_draft(&base, &corpus, config)?;
        *draft_spec = DraftSpec::Provided(trained);
    }

    let mut rows = Vec::new();
    let mut policies: Vec<Policy> = k_values.iter().map(|&k| Policy::Fixed(k)).collect();
    if include_adaptive {
        policies.push(Policy::Adaptive);
    }
    for policy in policies {
        let mut s = base_scenario.clone();
        s.policy.policy = policy;
        let out = simulate(&s, seed)?;
        rows.push(SweepRow { policy, label: policy.label(), metrics: out.metrics });
    }
    Ok(rows)
}

/// The predicted-throughput surface over (rate, stride).
#[derive(Debug, Clone)]
pub struct KLandscape<T> {
    pub gamma: T,
    pub k_max: u32,
    pub rates: Vec<T>,
    /// `etgr[i][k-1]` is the predicted rate at `rates[i]`, stride `k`.
    pub etgr: Vec<Vec<T>>,
    /// Per-rate argmax stride (smallest on ties).
    pub argmax_k: Vec<u32>,
}

/// Evaluates the predicted ETGR for every `(rate, k)` pair and the per-rate
/// optimum; the data behind the stride-vs-channel landscape.
pub fn optimal_k_landscape<T: Scalar>(
    gamma: T,
    params: &LatencyParams<T>,
    rates: &[T],
    k_max: u32,
    model: AcceptanceModel,
) -> Result<KLandscape<T>> {
    if rates.is_empty() {
        return Err(Error::Config("landscape needs at least one rate".into()));
    }
    if k_max < 1 {
        return Err(Error::Config("k_max must be >= 1".into()));
    }
    if !gamma.is_finite() || gamma < T::zero() || gamma > T::one() {
        return Err(Error::Config(format!("gamma must be in [0, 1], got {gamma}")));
    }
    params.validate()?;
    let mut etgr = Vec::with_capacity(rates.len());
    let mut argmax_k = Vec::with_capacity(rates.len());
    for &rate in rates {
        let (t_fixed, t_marginal) = crate::latency::fixed_and_marginal(rate, params)?;
        let mut row = Vec::with_capacity(k_max as usize);
        let mut best = (1u32, T::neg_infinity());
        for k in 1..=k_max {
            let v = (T::one() + expected_accepted(gamma, k, model))
                / (t_fixed + T::cast(k as f64) * t_marginal);
            if v > best.1 {
                best = (k, v);
            }
            row.push(v);
        }
        etgr.push(row);
        argmax_k.push(best.0);
    }
    Ok(KLandscape { gamma, k_max, rates: rates.to_vec(), etgr, argmax_k })
}

/// Acceptance of both drafts against one fine-tuned target version.
#[derive(Debug, Clone, Copy)]
pub struct ShiftRow<T> {
    pub magnitude: T,
    pub anchored: T,
    pub unanchored: T,
}

/// Evaluation protocol for [`version_shift_eval`].
#[derive(Debug, Clone, Copy)]
pub struct ShiftEvalConfig {
    /// Held-out prompts per magnitude.
    pub prompts: usize,
    pub prompt_len: usize,
    /// Stride used for the measurement rounds.
    pub k: u32,
    /// Verify rounds per magnitude.
    pub rounds: usize,
    /// Seed for the fine-tune direction.
    pub task_seed: u64,
    /// Seed for the held-out prompt source.
    pub eval_seed: u64,
}

impl Default for ShiftEvalConfig {
    fn default() -> Self {
        Self { prompts: 256, prompt_len: 8, k: 4, rounds: 512, task_seed: 0x7A5C, eval_seed: 0xE7A1 }
    }
}

/// Measures acceptance of an anchored draft and the unanchored control
/// against fine-tuned versions of the base target, one row per magnitude.
pub fn version_shift_eval<T: Scalar>(
    anchored: &DraftModel<T>,
    unanchored: &UnanchoredDraft<T>,
    base: &TargetModel<T>,
    magnitudes: &[T],
    cfg: &ShiftEvalConfig,
) -> Result<Vec<ShiftRow<T>>> {
    if magnitudes.is_empty() {
        return Err(Error::Config("shift eval needs at least one magnitude".into()));
    }
    // Held-out prompts from a fresh draw of the same corpus source.
    let prompt_corpus =
        Corpus::markov(base.vocab_size(), cfg.prompts, cfg.prompt_len.max(2), cfg.eval_seed)?;
    let prompts: Vec<Vec<Token>> =
        prompt_corpus.sequences().iter().map(|s| s[..cfg.prompt_len.min(s.len())].to_vec()).collect();

    let mut rows = Vec::with_capacity(magnitudes.len());
    for &magnitude in magnitudes {
        let target = if magnitude > T::zero() {
            base.fine_tune(magnitude, cfg.task_seed)?
        } else {
            base.clone()
        };
        let mut a = anchored.clone();
        let mut u = unanchored.clone();
        let anchored_acc = measure_acceptance(&mut a, &target, &prompts, cfg.k, cfg.rounds)?;
        let unanchored_acc = measure_acceptance(&mut u, &target, &prompts, cfg.k, cfg.rounds)?;
        rows.push(ShiftRow { magnitude, anchored: anchored_acc, unanchored: unanchored_acc });
    }
    Ok(rows)
}

/// Trains both drafts on the base target and runs the version-shift
/// comparison end to end.
pub fn run_shift_experiment<T: Scalar>(
    family: &FamilyConfig,
    train_cfg: &TrainingConfig<T>,
    corpus: &Corpus,
    magnitudes: &[T],
    cfg: &ShiftEvalConfig,
) -> Result<Vec<ShiftRow<T>>> {
    let base = TargetModel::base(family)?;
    let (anchored, _) = train_draft(&base, corpus, train_cfg)?;
    let (unanchored, _) = train_unanchored(&base, corpus, train_cfg)?;
    version_shift_eval(&anchored, &unanchored, &base, magnitudes, cfg)
}
