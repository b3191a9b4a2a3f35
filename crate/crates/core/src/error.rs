//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or constructor argument.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed text input (trace files, corpus files); `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed wire bytes.
    #[error("codec error: {0}")]
    Codec(String),

    /// Draft block offset does not match the cloud session; the client must
    /// resynchronize by replaying the committed prefix.
    #[error("session desync: session at offset {expected}, message claims {got}")]
    SessionDesync { expected: u64, got: u64 },

    /// Training loss became non-finite.
    #[error("training diverged at step {step}")]
    TrainingDiverged { step: usize },

    /// Simulation aborted; wraps the underlying failure with the round index.
    #[error("simulation failed at round {round}: {source}")]
    Simulation {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
