use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside stochastic domain: {0}")]
    OutOfDomain(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
