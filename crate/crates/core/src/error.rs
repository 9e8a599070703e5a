use thiserror::Error;

/// Errors raised across the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or model parameter is outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// Caller-supplied data violates a precondition (empty, degenerate, misaligned).
    #[error("invalid input: {0}")]
    Input(String),

    /// A MARMA specification failed its root checks.
    #[error("invalid specification: {0}")]
    Specification(String),

    /// An estimator was used before it held the state it needs.
    #[error("invalid state: {0}")]
    State(String),

    /// A numerical routine produced a non-finite or otherwise unusable value.
    #[error("numerical failure at index {index:?}: {message}")]
    Numeric { index: Option<usize>, message: String },

    /// A density violated its contract (negative values, non-monotone CDF).
    #[error("density contract violated: {0}")]
    DensityContract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(index: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Numeric { index, message: msg.into() }
    }
}
