use thiserror::Error;

/// Errors produced by the rsel library.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument left the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model or instance parameters (non-positive variance, no unique
    /// best alternative, ratios off the simplex, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The operation is only defined for a different distribution family.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// The requested expansion order is not available.
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),

    /// An iterative solver failed to converge; carries the residuals reached.
    #[error("solver did not converge: {0}")]
    Solver(String),

    /// Problem size outside the supported range (e.g. subset enumeration).
    #[error("size error: {0}")]
    Size(String),

    /// A numeric failure such as a singular covariance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Experiment configuration failed validation; the message names the field.
    #[error("config error: {0}")]
    Config(String),

    /// A sequential policy was queried in a state it cannot act on.
    #[error("policy error: {0}")]
    Policy(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
