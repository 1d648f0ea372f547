//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The vector field blew up during integration.
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    /// Non-finite or runaway loss during an optimization run.
    #[error("optimization diverged at iteration {iteration}")]
    OptimizationDiverged { iteration: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("series too short: need at least {needed} samples, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    #[error("singular regression: rank-deficient feature columns {columns:?}")]
    SingularRegression { columns: Vec<usize> },

    #[error("eigendecomposition failed at state index {state}")]
    EigenFailure { state: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model file: {0}")]
    ModelSchema(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
