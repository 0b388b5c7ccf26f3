use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("no supervised tokens")]
    NoSupervisedTokens,

    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("graph already consumed by a previous backward pass")]
    GraphConsumed,

    #[error("gradient buffer for `{0}` not zeroed before storing new gradients")]
    GradNotZeroed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("sequence of length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty filtered batch")]
    EmptyFilteredBatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("vocabulary mismatch: policy has {policy}, reference has {reference}")]
    VocabMismatch { policy: usize, reference: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("cannot parse task instruction: {0:?}")]
    Unparseable(String),

    #[error("{path}:{line}: {message}")]
    Jsonl {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing reward statistics file {0}; run `label` first")]
    MissingStats(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
