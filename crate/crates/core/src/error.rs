use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a DAG: relation contains a cycle")]
    NotADag,

    #[error("oracle limit: choice set of {size} items exceeds the enumeration guard of {limit}")]
    OracleLimit { size: usize, limit: usize },

    #[error("item {item} is not in the remaining set")]
    NotRemaining { item: usize },

    #[error("item {0} compared with itself")]
    SelfComparison(usize),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid dataset (trace {trace:?}): {message}")]
    InvalidDataset { trace: Option<usize>, message: String },

    #[error("non-finite value at coordinate {coordinate}: {context}")]
    NonFinite { coordinate: usize, context: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler initialisation failed: {0}")]
    Initialisation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
