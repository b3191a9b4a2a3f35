//! Speculative stride selection.
//!
//! Each round the edge picks the draft length `k` that maximizes the
//! predicted effective token generation rate
//!
//! ```text
//! etgr(k) = (1 + E[accepted | k]) / (t_fixed + k * t_marginal)
//! ```
//!
//! where the `+1` counts the correction token every round emits. The
//! expected accepted count comes from either a geometric decay model over
//! the online EMA acceptance estimate, or the linear `gamma * k`
//! approximation. The linear form makes the objective boundary-valued (the
//! argmax is always 1 or `k_max`; see the discrete-difference test below),
//! so geometric is the default.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How `E[accepted | k]` is approximated from the acceptance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcceptanceModel {
    /// Per-token acceptance is an independent coin with probability `gamma`,
    /// and the round stops at the first rejection:
    /// `E = gamma (1 - gamma^k) / (1 - gamma)`.
    #[default]
    Geometric,
    /// `E = gamma * k` (reasonable for small `k`, boundary-valued in the
    /// optimizer).
    Linear,
}

/// Online EMA estimate of the per-token acceptance rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceEstimator<T> {
    gamma_hat: T,
    mu: T,
}

/// Initial acceptance estimate before any round completes.
pub const GAMMA0_DEFAULT: f64 = 0.8;
/// Default EMA decay.
pub const MU_DEFAULT: f64 = 0.1;

impl<T: Scalar> Default for AcceptanceEstimator<T> {
    fn default() -> Self {
        Self { gamma_hat: T::cast(GAMMA0_DEFAULT), mu: T::cast(MU_DEFAULT) }
    }
}

impl<T: Scalar> AcceptanceEstimator<T> {
    pub fn new(gamma0: T, mu: T) -> Result<Self> {
        if !gamma0.is_finite() || gamma0 < T::zero() || gamma0 > T::one() {
            return Err(Error::Config(format!("gamma0 must be in [0, 1], got {gamma0}")));
        }
        if !mu.is_finite() || mu <= T::zero() || mu > T::one() {
            return Err(Error::Config(format!("mu must be in (0, 1], got {mu}")));
        }
        Ok(Self { gamma_hat: gamma0, mu })
    }

    pub fn gamma_hat(&self) -> T {
        self.gamma_hat
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// Folds one round outcome into the estimate:
    /// `gamma_hat <- (1 - mu) * gamma_hat + mu * (tau / k)`.
    ///
    /// The update is a convex combination, so the estimate stays in [0, 1].
    pub fn update(&mut self, tau: u32, k: u32) -> Result<()> {
        if k < 1 {
            return Err(Error::Contract(format!("ema update requires k >= 1, got {k}")));
        }
        if tau > k {
            return Err(Error::Contract(format!("accepted count {tau} exceeds stride {k}")));
        }
        let ratio = T::cast(tau as f64 / k as f64);
        self.gamma_hat = (T::one() - self.mu) * self.gamma_hat + self.mu * ratio;
        Ok(())
    }
}

/// Stride policy parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig<T> {
    /// Largest stride the optimizer may pick.
    pub k_max: u32,
    pub acceptance_model: AcceptanceModel,
    /// Below this acceptance estimate the policy stops speculating and
    /// falls back to single-token drafts.
    pub fallback_threshold: T,
}

impl<T: Scalar> Default for PolicyConfig<T> {
    fn default() -> Self {
        Self {
            k_max: 8,
            acceptance_model: AcceptanceModel::Geometric,
            fallback_threshold: T::cast(0.05),
        }
    }
}

impl<T: Scalar> PolicyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::Config("k_max must be >= 1".into()));
        }
        let f = self.fallback_threshold;
        if !f.is_finite() || f < T::zero() || f > T::one() {
            return Err(Error::Config(format!("fallback_threshold must be in [0, 1], got {f}")));
        }
        Ok(())
    }
}

/// Outcome of one stride selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDecision<T> {
    pub k: u32,
    pub predicted_etgr: T,
    pub fallback_engaged: bool,
}

/// Which policy drives the round loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Re-optimize the stride every round from the channel and the EMA.
    Adaptive,
    /// Always draft the same number of tokens (clamped to `k_max`).
    Fixed(u32),
    /// No drafting: every token is a full round-trip to the cloud.
    CloudOnly,
}

impl Policy {
    pub fn fixed(k: u32) -> Self {
        Policy::Fixed(k)
    }

    pub fn cloud_only() -> Self {
        Policy::CloudOnly
    }

    /// Stable label used in reports and sweep tables.
    pub fn label(&self) -> String {
        match self {
            Policy::Adaptive => "adaptive".to_string(),
            Policy::Fixed(k) => format!("fixed:{k}"),
            Policy::CloudOnly => "cloud_only".to_string(),
        }
    }
}

/// Expected number of accepted tokens out of a draft of `k`.
pub fn expected_accepted<T: Scalar>(gamma: T, k: u32, model: AcceptanceModel) -> T {
    debug_assert!(gamma >= T::zero() && gamma <= T::one());
    debug_assert!(k >= 1);
    let kf = T::cast(k as f64);
    match model {
        AcceptanceModel::Geometric => {
            if gamma == T::one() {
                kf
            } else {
                gamma * (T::one() - gamma.powi(k as i32)) / (T::one() - gamma)
            }
        }
        AcceptanceModel::Linear => (gamma * kf).min(kf),
    }
}

/// Predicted effective token generation rate for stride `k`, counting the
/// accepted prefix plus the always-emitted correction token.
pub fn predicted_etgr<T: Scalar>(
    gamma: T,
    k: u32,
    t_fixed: T,
    t_marginal: T,
    model: AcceptanceModel,
) -> Result<T> {
    let denom = t_fixed + T::cast(k as f64) * t_marginal;
    if !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "round time must be > 0 (t_fixed {t_fixed}, t_marginal {t_marginal}, k {k})"
        )));
    }
    Ok((T::one() + expected_accepted(gamma, k, model)) / denom)
}

/// Maximizes [`predicted_etgr`] over `k in [1, k_max]`, breaking ties toward
/// the smallest stride. Engages the fallback (`k = 1`) when the acceptance
/// estimate sits below the configured threshold.
pub fn select_k<T: Scalar>(
    estimator: &AcceptanceEstimator<T>,
    t_fixed: T,
    t_marginal: T,
    cfg: &PolicyConfig<T>,
) -> Result<PolicyDecision<T>> {
    cfg.validate()?;
    let gamma = estimator.gamma_hat();
    if gamma < cfg.fallback_threshold {
        return Ok(PolicyDecision {
            k: 1,
            predicted_etgr: predicted_etgr(gamma, 1, t_fixed, t_marginal, cfg.acceptance_model)?,
            fallback_engaged: true,
        });
    }
    let mut best_k = 1;
    let mut best = predicted_etgr(gamma, 1, t_fixed, t_marginal, cfg.acceptance_model)?;
    for k in 2..=cfg.k_max {
        let etgr = predicted_etgr(gamma, k, t_fixed, t_marginal, cfg.acceptance_model)?;
        if etgr > best {
            best = etgr;
            best_k = k;
        }
    }
    Ok(PolicyDecision { k: best_k, predicted_etgr: best, fallback_engaged: false })
}

/// Decision for a fixed-stride baseline: the stride is used as-is, clamped
/// to `[1, k_max]`; the predicted rate is still reported for comparison.
pub fn fixed_decision<T: Scalar>(
    k: u32,
    estimator: &AcceptanceEstimator<T>,
    t_fixed: T,
    t_marginal: T,
    cfg: &PolicyConfig<T>,
) -> Result<PolicyDecision<T>> {
    cfg.validate()?;
    let k = k.clamp(1, cfg.k_max);
    Ok(PolicyDecision {
        k,
        predicted_etgr: predicted_etgr(
            estimator.gamma_hat(),
            k,
            t_fixed,
            t_marginal,
            cfg.acceptance_model,
        )?,
        fallback_engaged: false,
    })
}
