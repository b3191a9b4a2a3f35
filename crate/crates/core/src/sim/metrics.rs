//! Aggregate statistics over round records.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::latency::{energy_step, PowerParams};
use crate::scalar::Scalar;

use super::engine::RoundRecord;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Fraction of total time (or energy) spent in each round phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentShares<T> {
    pub edge: T,
    pub up: T,
    pub cloud: T,
    pub down: T,
}

/// Aggregate outcome of one simulation.
///
/// `etgr_emitted` counts accepted tokens plus the per-round correction token
/// (the protocol always commits it); `etgr_accepted` counts accepted draft
/// tokens only. Both are ratios of totals over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics<T> {
    pub schema_version: u32,
    pub etgr_emitted: T,
    pub etgr_accepted: T,
    /// Mean `tau / k` over rounds that drafted (`k >= 1`).
    pub mean_acceptance: T,
    pub mean_token_latency_s: T,
    /// Nearest-rank 95th percentile of per-token latency, where each round
    /// attributes `t_total / (tau + 1)` to each token it emitted.
    pub p95_token_latency_s: T,
    pub total_time_s: T,
    pub total_energy_j: T,
    pub rounds: u64,
    pub tokens_emitted: u64,
    pub tokens_accepted: u64,
    pub time_shares: ComponentShares<T>,
    pub energy_shares: ComponentShares<T>,
}

impl<T: Scalar> Metrics<T> {
    /// Folds a round log into aggregate metrics. Energy shares are recomputed
    /// from the breakdowns and the power model, so they stay exact.
    pub fn from_records(records: &[RoundRecord<T>], power: &PowerParams<T>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Contract("metrics require at least one round".into()));
        }
        let mut t_edge = T::zero();
        let mut t_up = T::zero();
        let mut t_cloud = T::zero();
        let mut t_down = T::zero();
        let mut total_time = T::zero();
        let mut total_energy = T::zero();
        let mut e_compute = T::zero();
        let mut e_tx = T::zero();
        let mut e_rx = T::zero();
        let mut e_idle = T::zero();
        let mut tokens_emitted: u64 = 0;
        let mut tokens_accepted: u64 = 0;
        let mut acc_sum = T::zero();
        let mut draft_rounds: u64 = 0;
        let mut per_token: Vec<(T, u64)> = Vec::with_capacity(records.len());

        for r in records {
            t_edge += r.breakdown.t_edge;
            t_up += r.breakdown.t_up;
            t_cloud += r.breakdown.t_cloud;
            t_down += r.breakdown.t_down;
            total_time += r.breakdown.t_total;
            total_energy += r.energy_j;
            let e = energy_step(&r.breakdown, power);
            e_compute += e.compute;
            e_tx += e.tx;
            e_rx += e.rx;
            e_idle += e.idle;
            let emitted = r.tau as u64 + 1;
            tokens_emitted += emitted;
            tokens_accepted += r.tau as u64;
            if r.k >= 1 {
                acc_sum += T::cast(r.tau as f64 / r.k as f64);
                draft_rounds += 1;
            }
            per_token.push((r.breakdown.t_total / T::cast(emitted as f64), emitted));
        }

        if !(total_time > T::zero()) {
            return Err(Error::Domain("total simulated time must be > 0".into()));
        }

        // Nearest-rank p95 over the expanded per-token latency list.
        per_token.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite latencies"));
        let rank = ((tokens_emitted as f64) * 0.95).ceil().max(1.0) as u64;
        let mut seen = 0u64;
        let mut p95 = per_token.last().unwrap().0;
        for (lat, count) in &per_token {
            seen += count;
            if seen >= rank {
                p95 = *lat;
                break;
            }
        }

        let share = |x: T| x / total_time;
        let energy_share = |x: T| {
            if total_energy > T::zero() {
                x / total_energy
            } else {
                T::zero()
            }
        };
        Ok(Metrics {
            schema_version: METRICS_SCHEMA_VERSION,
            etgr_emitted: T::cast(tokens_emitted as f64) / total_time,
            etgr_accepted: T::cast(tokens_accepted as f64) / total_time,
            mean_acceptance: if draft_rounds > 0 {
                acc_sum / T::cast(draft_rounds as f64)
            } else {
                T::zero()
            },
            mean_token_latency_s: total_time / T::cast(tokens_emitted as f64),
            p95_token_latency_s: p95,
            total_time_s: total_time,
            total_energy_j: total_energy,
            rounds: records.len() as u64,
            tokens_emitted,
            tokens_accepted,
            time_shares: ComponentShares {
                edge: share(t_edge),
                up: share(t_up),
                cloud: share(t_cloud),
                down: share(t_down),
            },
            energy_shares: ComponentShares {
                edge: energy_share(e_compute),
                up: energy_share(e_tx),
                cloud: energy_share(e_idle),
                down: energy_share(e_rx),
            },
        })
    }
}
