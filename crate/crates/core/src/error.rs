use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no token reaches the minimum count of {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("document is empty after encoding")]
    EmptyDocument,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("batch normalization needs at least 2 rows in train mode, got {0}")]
    DegenerateBatch(usize),

    #[error("dropout probability must lie in [0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("{docs} documents cannot be split into {folds} folds")]
    TooFewDocuments { docs: usize, folds: usize },

    #[error("vocabulary mismatch: model has {model} words, data has {data} ({shared} shared)")]
    VocabularyMismatch { model: usize, data: usize, shared: usize },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("only {rows} usable rows, at least {needed} required")]
    InsufficientOverlap { rows: usize, needed: usize },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("cell {cell}, fold {fold}: {source}")]
    Grid {
        cell: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the data rather than from numerics
    /// or configuration.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::EmptyVocabulary { .. }
            | Error::EmptyDocument
            | Error::TooFewDocuments { .. }
            | Error::VocabularyMismatch { .. }
            | Error::InsufficientOverlap { .. }
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::Grid { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) => true,
            Error::Grid { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
