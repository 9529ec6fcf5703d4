use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the grid, net, norm and interpolation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header field `{field}`: {reason}")]
    Header { field: &'static str, reason: String },

    #[error("extent mismatch: header declares {expected} values, payload has {found}")]
    ExtentMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("unparsable value `{token}` at index {index}")]
    Parse { index: usize, token: String },

    #[error("dimension {0} is not supported (expected 1 or 2)")]
    UnsupportedDim(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("dyadic order {order} outside representable range [{min}, {max}]")]
    OrderOutOfRange { order: i32, min: i32, max: i32 },

    #[error("partition measure {tau} is not representable; nearest representable values are {below:?} and {above:?}")]
    NonRepresentableMeasure {
        tau: f64,
        below: Option<f64>,
        above: Option<f64>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function takes negative value {value} at cell {index}; a nonnegative function is required")]
    NegativeFunction { index: usize, value: f64 },

    #[error("explicit net is empty")]
    EmptyNet,

    #[error("malformed net list line {line}: {reason}")]
    NetList { line: usize, reason: String },

    #[error("operator output leaves the window: {0}")]
    OutsideWindow(String),

    #[error("frozen constants file {path}: {reason}")]
    Frozen { path: PathBuf, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
