//! Deterministic discrete-event harness for the `vaba-core` protocol:
//! adversarial scheduling, Byzantine behaviors, ground-truth checks and
//! per-run metrics.

pub mod adversary;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod sim;

pub use config::{AdversaryKind, ExperimentConfig, HaltPolicy};
pub use experiment::{run_many, write_outputs};
pub use metrics::{aggregate, RunMetrics, Summary, Violations};
pub use sim::{run_one, RunOutcome, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("seed {seed}: event budget of {budget} exhausted with undecided honest parties")]
    BudgetExhausted { seed: u64, budget: u64 },
    #[error("seed {seed}: no pending envelopes at event {events} but honest parties are undecided")]
    Quiescent { seed: u64, events: u64 },
    #[error("no runs to aggregate")]
    EmptyAggregate,
    #[error(transparent)]
    Crypto(#[from] vaba_core::CryptoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
