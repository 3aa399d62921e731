use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid is not rectangular: row {row} has {got} columns, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("value {value} at ({row}, {col}) is outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid probability stack: {0}")]
    InvalidStack(String),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("patch size {patch} exceeds map shape {shape:?}")]
    PatchTooLarge { patch: usize, shape: (usize, usize) },
    #[error("threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("quantile {0} must lie in (0, 1)")]
    InvalidQuantile(f64),
    #[error("mask contains no foreground pixels")]
    NoForeground,
    #[error("a segmentation mask is required for strategy `{0}`")]
    MaskRequired(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("duplicate strategy `{0}`")]
    DuplicateStrategy(String),
    #[error("epsilon {0} must lie in (0, 0.5)")]
    InvalidEpsilon(f64),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("covariance of component {0} is not positive definite")]
    SingularCovariance(usize),
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),
    #[error("feature set is empty")]
    EmptyFeatureSet,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is empty")]
    Empty,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("strategy sets differ between tables: {0}")]
    StrategySetMismatch(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("bad NPY magic")]
    BadMagic,
    #[error("malformed NPY header: {0}")]
    BadHeader(String),
    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrderUnsupported,
    #[error("expected a 2-D array, got {0} dimensions")]
    NonTwoDimensional(usize),
    #[error("payload has {got} bytes, expected {expected}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
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

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of otherwise readable input.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
