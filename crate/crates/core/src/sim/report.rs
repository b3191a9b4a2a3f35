//! Machine-readable run reports.
//!
//! The rounds CSV and the summary JSON are the plot-ready outputs of a run.
//! Floats are printed with Rust's shortest-round-trip formatting, so parsing
//! a CSV back reproduces the original `f64` values exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::latency::StepBreakdown;
use crate::scalar::Scalar;

use super::engine::RoundRecord;
use super::metrics::Metrics;

/// Column order of the rounds CSV.
pub const ROUNDS_CSV_HEADER: &str =
    "round,rate_bps,k,tau,t_edge,t_up,t_cloud,t_down,t_total,energy_j,gamma_hat,fallback";

/// Output flavor of [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Per-round table.
    Csv,
    /// Summary metrics document.
    Json,
}

/// Renders the per-round table.
pub fn rounds_to_csv<T: Scalar>(records: &[RoundRecord<T>]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(ROUNDS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.rate,
            r.k,
            r.tau,
            r.breakdown.t_edge,
            r.breakdown.t_up,
            r.breakdown.t_cloud,
            r.breakdown.t_down,
            r.breakdown.t_total,
            r.energy_j,
            r.gamma_hat,
            r.fallback,
        ));
    }
    out
}

/// Parses a rounds CSV back into records (exact for files this crate wrote).
pub fn parse_rounds_csv<T: Scalar>(text: &str) -> Result<Vec<RoundRecord<T>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == ROUNDS_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") })
        }
        None => return Err(Error::Parse { line: 1, msg: "empty file".into() }),
    }
    let mut records = Vec::new();
    for (lineno, raw) in lines {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 12 {
            return Err(Error::Parse { line, msg: format!("expected 12 fields, got {}", f.len()) });
        }
        let num = |name: &str, s: &str| -> Result<T> {
            s.parse::<f64>()
                .map(T::cast)
                .map_err(|_| Error::Parse { line, msg: format!("invalid {name}: {s:?}") })
        };
        let int = |name: &str, s: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::Parse { line, msg: format!("invalid {name}: {s:?}") })
        };
        records.push(RoundRecord {
            round: int("round", f[0])?,
            rate: num("rate_bps", f[1])?,
            k: int("k", f[2])? as u32,
            tau: int("tau", f[3])? as u32,
            breakdown: StepBreakdown {
                t_edge: num("t_edge", f[4])?,
                t_up: num("t_up", f[5])?,
                t_cloud: num("t_cloud", f[6])?,
                t_down: num("t_down", f[7])?,
                t_total: num("t_total", f[8])?,
            },
            energy_j: num("energy_j", f[9])?,
            gamma_hat: num("gamma_hat", f[10])?,
            fallback: match f[11] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse { line, msg: format!("invalid fallback flag {other:?}") })
                }
            },
        });
    }
    Ok(records)
}

/// Renders the summary document.
pub fn metrics_to_json<T: Scalar + serde::Serialize>(metrics: &Metrics<T>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(metrics)
        .map_err(|e| Error::Config(format!("metrics serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes one report file and returns the bytes written.
pub fn write_report<T: Scalar + serde::Serialize>(
    records: &[RoundRecord<T>],
    metrics: &Metrics<T>,
    format: ReportFormat,
    destination: &Path,
) -> Result<u64> {
    let body = match format {
        ReportFormat::Csv => rounds_to_csv(records),
        ReportFormat::Json => metrics_to_json(metrics)?,
    };
    fs::write(destination, body.as_bytes())?;
    Ok(body.len() as u64)
}
