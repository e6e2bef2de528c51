use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("malformed sparse data: {0}")]
    MalformedData(String),

    #[error("coordinate {0} has zero sampling weight")]
    ZeroWeightColumn(usize),

    #[error("no positive weight in distribution")]
    AllZeroWeights,

    #[error("negative or non-finite weight {value} at index {index}")]
    BadWeight { index: usize, value: f64 },

    #[error("residual cache belongs to a different problem")]
    StaleCache,

    #[error("coordinate {j} is outside the support of component {i}")]
    NotInSupport { i: usize, j: usize },

    #[error("diverged at epoch {epoch}: f = {value:e} exceeds guard {threshold:e}")]
    Diverged { epoch: usize, value: f64, threshold: f64 },

    #[error("enumeration budget exceeded: {entries} support entries > {budget}")]
    BudgetExceeded { entries: usize, budget: usize },

    #[error("iteration cap of {0} reached before convergence")]
    IterationCap(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
