//! Channel-aware edge-cloud speculative decoding, desk scale.
//!
//! An edge device drafts blocks of tokens with a small static model; a cloud
//! target verifies them greedily, rolls its KV session back to the accepted
//! prefix, and returns a correction token. The draft stride adapts per round
//! to the measured uplink rate by maximizing the predicted effective token
//! generation rate. The crate provides:
//!
//! - [`channel`]: uplink-rate sources (constant, trace-driven, Gilbert-Elliott);
//! - [`latency`]: the round latency decomposition and its fixed/marginal form;
//! - [`policy`]: the stride optimizer and the EMA acceptance estimator;
//! - [`models`]: a toy anchored draft/target family plus synthetic pairs;
//! - [`protocol`]: the draft/verify state machine, KV rollback, wire codec;
//! - [`sim`]: scenario simulation, metrics, reports, and experiments.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiations the CLI and the reports use.

pub mod channel;
pub mod error;
pub mod latency;
pub mod models;
pub mod policy;
pub mod protocol;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Token index as carried on the wire (16-bit, vocabularies up to 65536).
pub type Token = u16;

/// Default scalar for simulations and reports.
pub type Real = f64;

pub type ChannelTrace = channel::ChannelTrace<Real>;
pub type ChannelModel = channel::ChannelModel<Real>;
pub type GilbertElliottParams = channel::GilbertElliottParams<Real>;
pub type LatencyParams = latency::LatencyParams<Real>;
pub type PowerParams = latency::PowerParams<Real>;
pub type StepBreakdown = latency::StepBreakdown<Real>;
pub type AcceptanceEstimator = policy::AcceptanceEstimator<Real>;
pub type PolicyConfig = policy::PolicyConfig<Real>;
pub type PolicyDecision = policy::PolicyDecision<Real>;
pub type TargetModel = models::TargetModel<Real>;
pub type DraftModel = models::DraftModel<Real>;
pub type TrainingConfig = models::TrainingConfig<Real>;
pub type KvSession = protocol::KvSession<Real>;
pub type Scenario = sim::Scenario<Real>;
pub type Metrics = sim::Metrics<Real>;
pub type RoundRecord = sim::RoundRecord<Real>;
