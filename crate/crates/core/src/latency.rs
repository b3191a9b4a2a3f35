//! Per-round latency decomposition and energy accounting.
//!
//! One speculative round of stride `k` costs
//!
//! ```text
//! t_step(k, R) = t_edge(k) + t_up(k, R) + t_cloud(k) + t_down
//! ```
//!
//! with an edge drafting term `alpha_edge * k + beta`, an uplink term
//! `t_prop + (k * token_bits + header_bits) / R`, and a cloud verification
//! term `t_base + k * delta_cloud`. Grouping the pieces that do not scale
//! with `k` gives the fixed/marginal form used by the stride policy:
//!
//! ```text
//! t_step(k, R) = t_fixed(R) + k * t_marginal(R)
//! ```
//!
//! The two forms are algebraically identical; `step_time` and
//! [`fixed_and_marginal`] are tested against each other to 1e-12.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Timing coefficients of the round latency model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LatencyParams<T> {
    /// Edge drafting cost per token (seconds/token).
    pub alpha_edge: T,
    /// Edge fixed cost per round (seconds).
    pub beta: T,
    /// Wire size of one token index (bits). Must match the codec (16) for the
    /// policy's cost model to agree with what the protocol actually pays.
    pub token_bits: T,
    /// Protocol overhead per uplink message (bits).
    pub header_bits: T,
    /// One-way propagation delay (seconds).
    pub t_prop: T,
    /// Cloud verification base cost (seconds).
    pub t_base: T,
    /// Cloud verification marginal cost per draft token (seconds/token).
    pub delta_cloud: T,
    /// Downlink delay for the verification result (seconds).
    pub t_down: T,
}

impl<T: Scalar> Default for LatencyParams<T> {
    fn default() -> Self {
        Self {
            alpha_edge: T::cast(0.002),
            beta: T::cast(0.002),
            token_bits: T::cast(16.0),
            header_bits: T::cast(120.0),
            t_prop: T::cast(0.015),
            t_base: T::cast(0.03),
            delta_cloud: T::cast(0.002),
            t_down: T::cast(0.005),
        }
    }
}

impl<T: Scalar> LatencyParams<T> {
    /// Checks that every coefficient is finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha_edge", self.alpha_edge),
            ("beta", self.beta),
            ("token_bits", self.token_bits),
            ("header_bits", self.header_bits),
            ("t_prop", self.t_prop),
            ("t_base", self.t_base),
            ("delta_cloud", self.delta_cloud),
            ("t_down", self.t_down),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::Config(format!(
                    "latency parameter {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-component timing of one round. `t_total` is always the exact sum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepBreakdown<T> {
    pub t_edge: T,
    pub t_up: T,
    pub t_cloud: T,
    pub t_down: T,
    pub t_total: T,
}

impl<T: Scalar> StepBreakdown<T> {
    /// Builds a breakdown from its components, deriving the total.
    pub fn new(t_edge: T, t_up: T, t_cloud: T, t_down: T) -> Self {
        Self {
            t_edge,
            t_up,
            t_cloud,
            t_down,
            t_total: t_edge + t_up + t_cloud + t_down,
        }
    }
}

/// Device power draw per activity phase (watts).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PowerParams<T> {
    pub p_edge_compute: T,
    pub p_radio_tx: T,
    pub p_radio_rx: T,
    pub p_idle: T,
}

impl<T: Scalar> Default for PowerParams<T> {
    fn default() -> Self {
        // No measured coefficients exist for the toy setup; the defaults only
        // encode that radio transmit draws more than local compute.
        Self {
            p_edge_compute: T::cast(2.0),
            p_radio_tx: T::cast(4.0),
            p_radio_rx: T::cast(1.5),
            p_idle: T::cast(0.5),
        }
    }
}

impl<T: Scalar> PowerParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_edge_compute", self.p_edge_compute),
            ("p_radio_tx", self.p_radio_tx),
            ("p_radio_rx", self.p_radio_rx),
            ("p_idle", self.p_idle),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::Config(format!(
                    "power parameter {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Energy of one round split by activity phase (joules).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyBreakdown<T> {
    /// Edge compute while drafting.
    pub compute: T,
    /// Radio transmit during uplink.
    pub tx: T,
    /// Radio receive during downlink.
    pub rx: T,
    /// Idle draw while the cloud verifies.
    pub idle: T,
    pub total: T,
}

fn ensure_positive_rate<T: Scalar>(rate: T) -> Result<()> {
    if !(rate > T::zero()) || !rate.is_finite() {
        Err(Error::Domain(format!("uplink rate must be > 0, got {rate}")))
    } else {
        Ok(())
    }
}

/// Uplink time for a block of `k` tokens: `t_prop + (k*token_bits + header_bits) / rate`.
pub fn uplink_time<T: Scalar>(k: u32, rate: T, p: &LatencyParams<T>) -> Result<T> {
    ensure_positive_rate(rate)?;
    let payload = T::cast(k as f64) * p.token_bits + p.header_bits;
    Ok(p.t_prop + payload / rate)
}

/// Uplink time for an already-encoded payload of `bits` bits.
pub fn uplink_time_bits<T: Scalar>(bits: T, rate: T, p: &LatencyParams<T>) -> Result<T> {
    ensure_positive_rate(rate)?;
    Ok(p.t_prop + bits / rate)
}

/// Cloud verification time: `t_base + k * delta_cloud`.
pub fn cloud_time<T: Scalar>(k: u32, p: &LatencyParams<T>) -> T {
    p.t_base + T::cast(k as f64) * p.delta_cloud
}

/// Edge drafting time: `alpha_edge * k + beta`.
pub fn edge_time<T: Scalar>(k: u32, p: &LatencyParams<T>) -> T {
    p.alpha_edge * T::cast(k as f64) + p.beta
}

/// Splits the round cost into its stride-independent and per-token parts.
///
/// `t_fixed = t_prop + t_base + t_down + header_bits/rate + beta` and
/// `t_marginal = alpha_edge + token_bits/rate + delta_cloud`, so that
/// `t_fixed + k * t_marginal` recombines into [`step_time`] exactly.
pub fn fixed_and_marginal<T: Scalar>(rate: T, p: &LatencyParams<T>) -> Result<(T, T)> {
    ensure_positive_rate(rate)?;
    let t_fixed = p.t_prop + p.t_base + p.t_down + p.header_bits / rate + p.beta;
    let t_marginal = p.alpha_edge + p.token_bits / rate + p.delta_cloud;
    Ok((t_fixed, t_marginal))
}

/// Full per-component timing of a round with stride `k >= 1`.
pub fn step_time<T: Scalar>(k: u32, rate: T, p: &LatencyParams<T>) -> Result<StepBreakdown<T>> {
    if k < 1 {
        return Err(Error::Contract(format!("step_time requires k >= 1, got {k}")));
    }
    let t_up = uplink_time(k, rate, p)?;
    Ok(StepBreakdown::new(
        edge_time(k, p),
        t_up,
        cloud_time(k, p),
        p.t_down,
    ))
}

/// Time to push a draft model of `model_bytes` bytes over a link of `rate`
/// bits/s at the given protocol `efficiency` (net goodput fraction).
pub fn sync_time<T: Scalar>(model_bytes: u64, rate: T, efficiency: T) -> Result<T> {
    if model_bytes == 0 {
        return Err(Error::Domain("model size must be > 0 bytes".into()));
    }
    ensure_positive_rate(rate)?;
    if !(efficiency > T::zero()) || efficiency > T::one() {
        return Err(Error::Domain(format!(
            "efficiency must be in (0, 1], got {efficiency}"
        )));
    }
    Ok(T::cast(8.0 * model_bytes as f64) / (efficiency * rate))
}

/// Default goodput fraction assumed when estimating synchronization time.
pub const SYNC_EFFICIENCY_DEFAULT: f64 = 0.89;

/// Energy of one round: each phase's duration weighted by its power draw.
pub fn energy_step<T: Scalar>(b: &StepBreakdown<T>, pw: &PowerParams<T>) -> EnergyBreakdown<T> {
    let compute = pw.p_edge_compute * b.t_edge;
    let tx = pw.p_radio_tx * b.t_up;
    let rx = pw.p_radio_rx * b.t_down;
    let idle = pw.p_idle * b.t_cloud;
    EnergyBreakdown {
        compute,
        tx,
        rx,
        idle,
        total: compute + tx + rx + idle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(
        alpha: f64,
        beta: f64,
        b: f64,
        header: f64,
        prop: f64,
        base: f64,
        delta: f64,
        down: f64,
    ) -> LatencyParams<f64> {
        LatencyParams {
            alpha_edge: alpha,
            beta,
            token_bits: b,
            header_bits: header,
            t_prop: prop,
            t_base: base,
            delta_cloud: delta,
            t_down: down,
        }
    }

    #[test]
    fn uplink_five_tokens_hand_value() {
        // t_prop + (5*16 + 320) / 1e6 = 0.01 + 400e-6
        let p = params(0.0, 0.0, 16.0, 320.0, 0.01, 0.0, 0.0, 0.0);
        assert_relative_eq!(uplink_time(5, 1e6, &p).unwrap(), 0.0104, max_relative = 1e-12);
    }

    #[test]
    fn uplink_zero_payload_is_zero() {
        let p = params(0.0, 0.0, 16.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(uplink_time(0, 1e6, &p).unwrap(), 0.0);
    }

    #[test]
    fn uplink_doubling_rate_halves_transfer_term() {
        let p = params(0.0, 0.0, 16.0, 320.0, 0.01, 0.0, 0.0, 0.0);
        let slow = uplink_time(5, 1e6, &p).unwrap() - p.t_prop;
        let fast = uplink_time(5, 2e6, &p).unwrap() - p.t_prop;
        assert_relative_eq!(slow, 2.0 * fast, max_relative = 1e-12);
    }

    #[test]
    fn uplink_rejects_nonpositive_rate() {
        let p = LatencyParams::<f64>::default();
        assert!(matches!(uplink_time(1, 0.0, &p), Err(Error::Domain(_))));
        assert!(matches!(uplink_time(1, -5.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn cloud_time_affine() {
        let p = params(0.0, 0.0, 16.0, 0.0, 0.0, 0.05, 0.002, 0.0);
        assert_eq!(cloud_time(0, &p), 0.05);
        assert_relative_eq!(cloud_time(5, &p), 0.06, max_relative = 1e-12);
        assert_relative_eq!(cloud_time(6, &p) - cloud_time(5, &p), 0.002, max_relative = 1e-9);
    }

    #[test]
    fn edge_time_affine() {
        let p = params(0.0085, 0.0, 16.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(edge_time(4, &p), 0.034, max_relative = 1e-12);
        let p2 = params(0.0085, 0.003, 16.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(edge_time(0, &p2), 0.003);
        assert_relative_eq!(edge_time(7, &p2) - edge_time(6, &p2), 0.0085, max_relative = 1e-9);
    }

    #[test]
    fn fixed_and_marginal_single_term() {
        let p = params(0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0);
        let (f, m) = fixed_and_marginal(1e6, &p).unwrap();
        assert_eq!((f, m), (0.1, 0.0));
    }

    #[test]
    fn fixed_and_marginal_hand_value() {
        let p = params(0.001, 0.002, 16.0, 320.0, 0.02, 0.05, 0.002, 0.01);
        let (f, m) = fixed_and_marginal(1e5, &p).unwrap();
        assert_relative_eq!(f, 0.0852, max_relative = 1e-12);
        assert_relative_eq!(m, 0.00316, max_relative = 1e-12);
    }

    #[test]
    fn step_time_matches_fixed_marginal_recombination() {
        let p = params(0.001, 0.002, 16.0, 320.0, 0.02, 0.05, 0.002, 0.01);
        let (f, m) = fixed_and_marginal(1e5, &p).unwrap();
        for k in 1..=64u32 {
            let step = step_time(k, 1e5, &p).unwrap();
            assert_relative_eq!(step.t_total, f + k as f64 * m, max_relative = 1e-12);
            let sum = step.t_edge + step.t_up + step.t_cloud + step.t_down;
            assert_eq!(step.t_total, sum);
        }
    }

    #[test]
    fn step_time_monotone_in_k_and_rate() {
        let p = LatencyParams::<f64>::default();
        let mut prev = 0.0;
        for k in 1..=32u32 {
            let t = step_time(k, 1e5, &p).unwrap().t_total;
            assert!(t > prev);
            prev = t;
        }
        let slow = step_time(4, 1e4, &p).unwrap().t_total;
        let fast = step_time(4, 1e6, &p).unwrap().t_total;
        assert!(fast < slow);
    }

    #[test]
    fn step_time_rejects_zero_stride() {
        let p = LatencyParams::<f64>::default();
        assert!(matches!(step_time(0, 1e6, &p), Err(Error::Contract(_))));
    }

    #[test]
    fn sync_time_matches_published_durations() {
        // 3.2 GB draft model over 10/50/300 Mbps at 0.89 goodput.
        let t10: f64 = sync_time(3_200_000_000, 1e7, 0.89).unwrap();
        assert_relative_eq!(t10, 2876.4, max_relative = 1e-3);
        assert!((t10 / 60.0 - 48.0).abs() / 48.0 < 0.01);

        let t50: f64 = sync_time(3_200_000_000, 5e7, 0.89).unwrap();
        assert!((t50 / 60.0 - 9.5).abs() / 9.5 < 0.01);

        let t300: f64 = sync_time(3_200_000_000, 3e8, 0.89).unwrap();
        assert!((t300 / 60.0 - 1.6).abs() / 1.6 < 0.01);
    }

    #[test]
    fn sync_time_raw_rate_arithmetic() {
        assert_relative_eq!(
            sync_time(3_200_000_000u64, 1e7, 1.0).unwrap(),
            2560.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sync_time_scaling_laws() {
        let base: f64 = sync_time(1_000_000, 1e6, 0.9).unwrap();
        assert_relative_eq!(sync_time(2_000_000, 1e6, 0.9).unwrap(), 2.0 * base, max_relative = 1e-12);
        assert_relative_eq!(sync_time(1_000_000, 2e6, 0.9).unwrap(), base / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn sync_time_rejects_bad_efficiency() {
        assert!(matches!(sync_time::<f64>(1, 1e6, 0.0), Err(Error::Domain(_))));
        assert!(matches!(sync_time::<f64>(1, 1e6, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn energy_zero_powers_zero_energy() {
        let b = StepBreakdown::new(0.1, 0.2, 0.3, 0.4);
        let pw = PowerParams { p_edge_compute: 0.0, p_radio_tx: 0.0, p_radio_rx: 0.0, p_idle: 0.0 };
        assert_eq!(energy_step(&b, &pw).total, 0.0);
    }

    #[test]
    fn energy_unit_powers_equal_total_time() {
        let b = StepBreakdown::new(0.1, 0.2, 0.3, 0.4);
        let pw = PowerParams { p_edge_compute: 1.0, p_radio_tx: 1.0, p_radio_rx: 1.0, p_idle: 1.0 };
        assert_relative_eq!(energy_step(&b, &pw).total, b.t_total, max_relative = 1e-12);
    }

    #[test]
    fn energy_weighted_hand_value() {
        // Breakdown of k=5 at 1e5 bps under the fixed_and_marginal test params:
        // t_edge = 0.007, t_up = 0.024, t_cloud = 0.06, t_down = 0.01.
        let p = params(0.001, 0.002, 16.0, 320.0, 0.02, 0.05, 0.002, 0.01);
        let b = step_time(5, 1e5, &p).unwrap();
        let pw = PowerParams { p_edge_compute: 2.0, p_radio_tx: 3.0, p_radio_rx: 1.0, p_idle: 0.5 };
        let e = energy_step(&b, &pw);
        // 2*0.007 + 3*0.024 + 1*0.01 + 0.5*0.06 = 0.126
        assert_relative_eq!(e.total, 0.126, max_relative = 1e-12);
        assert_relative_eq!(e.compute, 0.014, max_relative = 1e-12);
        assert_relative_eq!(e.tx, 0.072, max_relative = 1e-12);
    }

    #[test]
    fn works_at_f32() {
        let p = LatencyParams::<f32>::default();
        let (f, m) = fixed_and_marginal(1e5f32, &p).unwrap();
        let step = step_time(3, 1e5f32, &p).unwrap();
        assert_relative_eq!(step.t_total, f + 3.0 * m, max_relative = 1e-5);
    }
}
