use std::path::PathBuf;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("gradient tape ordering violated at node {node}")]
    CycleDetected { node: usize },

    #[error("tape root {node} is not a scalar")]
    NonScalarRoot { node: usize },

    #[error("mixture component {component} received no responsibility")]
    EmptyComponent { component: usize },

    #[error("every component assigns zero density to row {row}")]
    AllZeroDensity { row: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("ordering is not a permutation of 1..={0}")]
    InvalidOrdering(usize),

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("class {0} has no instances")]
    EmptyClass(String),

    #[error("unknown class {0}")]
    UnknownClass(String),

    #[error("class {label}: {source}")]
    ClassFit {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("class {label} has {count} members, fewer than {folds} folds")]
    ClassTooSmall {
        label: String,
        count: usize,
        folds: usize,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("cannot parse {value:?} at row {row}, column {column:?}")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported model record: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
