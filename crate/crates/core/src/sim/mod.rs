//! Step-driven orchestration of rounds over a channel and latency model.
//!
//! The simulation clock is logical: round `n` samples the channel at the
//! accumulated simulated time, so faster policies see more of a time-indexed
//! trace. Runs end when the committed-token budget is met (the toy models
//! have no end-of-sequence token).

mod engine;
mod experiments;
mod metrics;
mod report;
mod scenario;

pub use engine::{simulate, target_only_decode, RoundRecord, SimOutput};
pub use experiments::{
    optimal_k_landscape, run_shift_experiment, sweep_k, version_shift_eval, KLandscape,
    ShiftEvalConfig, ShiftRow, SweepRow,
};
pub use metrics::{ComponentShares, Metrics, METRICS_SCHEMA_VERSION};
pub use report::{
    metrics_to_json, parse_rounds_csv, rounds_to_csv, write_report, ReportFormat,
    ROUNDS_CSV_HEADER,
};
pub use scenario::{ChannelSpec, CorpusSpec, DraftSpec, ModelSpec, PolicySpec, Scenario};
