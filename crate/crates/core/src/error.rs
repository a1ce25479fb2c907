use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate event id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("unknown event id `{0}` in split file")]
    UnknownId(String),

    #[error("split sizes {train}+{validation}+{test} do not sum to catalog length {catalog}")]
    SplitSize {
        train: usize,
        validation: usize,
        test: usize,
        catalog: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("grid spec mismatch between operands")]
    SpecMismatch,

    #[error("index ({row}, {col}) outside {n_rows}x{n_cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("point ({lat}, {lon}) lies outside the grid window")]
    OutsideWindow { lat: f64, lon: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no site data (AVS30 = {0})")]
    NoSiteData(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model file: {0}")]
    Version(String),

    #[error("truncated model payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("training split is empty")]
    EmptySplit,

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("no prediction for event `{0}`")]
    MissingPrediction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dim(expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
