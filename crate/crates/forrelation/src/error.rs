use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("vector {id} is linearly dependent on earlier queries")]
    DegenerateQuery { id: usize, predicted: f64 },

    #[error("vector {0} was already queried")]
    RepeatedQuery(usize),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
