use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("self-loop on node `{id}` at row {row}")]
    SelfLoop { row: usize, id: String },

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    /// A directed cycle, listed as node ids with the first node repeated at the end.
    #[error("graph is not acyclic; cycle: {}", .0.join(" -> "))]
    CycleFound(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("at least 2 nodes are required, got {0}")]
    TooFewNodes(usize),

    #[error("chain has no retained samples")]
    EmptyChain,

    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("all categorical weights are zero for dyad ({p}, {q})")]
    DegenerateWeights { p: usize, q: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
