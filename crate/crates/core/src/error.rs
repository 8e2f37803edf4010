use crate::dataset::RowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("ragged input: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("dataset has no live rows")]
    EmptyDataset,
    #[error("unknown row id {0}")]
    UnknownRow(RowId),
    #[error("row id {0} was already deleted")]
    AlreadyDeleted(RowId),
    #[error("need at least {needed} live rows, have {live}")]
    TooFewRows { needed: usize, live: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model does not match dataset: {0}")]
    ModelMismatch(String),
    #[error("replay diverged from recorded training run: {0}")]
    ReplayDiverged(String),
    #[error("fewer than two non-empty clusters")]
    SingleCluster,
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("baseline loss must be positive, got {0}")]
    ZeroBaseline(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
