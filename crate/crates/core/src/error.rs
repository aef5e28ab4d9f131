use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("correlation {0} outside (-1, 1)")]
    InvalidCorrelation(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate odds: mean response probability {0} in an arm")]
    DegenerateOdds(f64),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureNotConverged { tol: f64, estimate: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
