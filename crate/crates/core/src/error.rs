use thiserror::Error;

/// Errors raised across the crate.
///
/// Infeasibility of a deployment is *not* an error: it is reported through
/// [`crate::model::FeasibilityReport`]. Errors are reserved for malformed
/// input, broken references and internal invariant violations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid application `{app}`: {reason}")]
    InvalidApplication { app: String, reason: String },

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("structural error in deployment: {0}")]
    Structural(String),

    #[error("rejection sink: {0}")]
    Sink(String),

    #[error("latency preprocessing: {0}")]
    Latency(String),

    #[error("linear model: {0}")]
    Model(String),

    #[error("instance too large for the exact solver ({0}); use the PRANOS planner instead")]
    TooLarge(String),

    #[error("planner: {0}")]
    Planner(String),

    #[error("rounding: {0}")]
    Rounding(String),

    #[error("harness: {0}")]
    Harness(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
