use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SurvError>;

#[derive(Debug, Error)]
pub enum SurvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error on row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error on row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column `{0}` has no observed values")]
    AllMissing(String),

    #[error("row count mismatch: expected {expected}, found {found}")]
    RowMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("no events in data; the estimate is undefined")]
    NoEvents,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("infinite divergence: predicted probability is zero at index {0} where the target is positive")]
    InfiniteDivergence(usize),

    #[error("no features selected at lambda {0}")]
    NoFeaturesSelected(f64),

    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("unmatched keys: {}", .0.join(", "))]
    UnmatchedKeys(Vec<String>),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SurvError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SurvError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SurvError::InvalidArgument(msg.into())
    }

    /// Stable machine-readable code for command-line reporting.
    pub fn code(&self) -> &'static str {
        match self {
            SurvError::Io { .. } => "E_IO",
            SurvError::Parse { .. } => "E_PARSE",
            SurvError::InvalidRow { .. } => "E_VALIDATION",
            SurvError::Schema(_) => "E_SCHEMA",
            SurvError::AllMissing(_) => "E_ALL_MISSING",
            SurvError::RowMismatch { .. } => "E_ROW_MISMATCH",
            SurvError::LengthMismatch { .. } => "E_LENGTH",
            SurvError::NoEvents => "E_NO_EVENTS",
            SurvError::Empty(_) => "E_EMPTY",
            SurvError::NonFinite(_) => "E_NON_FINITE",
            SurvError::NoComparablePairs => "E_NO_PAIRS",
            SurvError::InvalidArgument(_) => "E_ARGUMENT",
            SurvError::InvalidDistribution(_) => "E_DISTRIBUTION",
            SurvError::InfiniteDivergence(_) => "E_INFINITE_KL",
            SurvError::NoFeaturesSelected(_) => "E_NO_FEATURES",
            SurvError::MissingColumns(_) => "E_MISSING_COLUMNS",
            SurvError::UnmatchedKeys(_) => "E_UNMATCHED_KEYS",
            SurvError::ModelFormat(_) => "E_MODEL_FORMAT",
            SurvError::Csv(_) => "E_CSV",
            SurvError::Json(_) => "E_JSON",
        }
    }
}
