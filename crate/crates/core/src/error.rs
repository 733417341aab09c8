use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GazeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GazeError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("wrong coordinate space: expected {expected}, got {actual}")]
    WrongSpace {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("no face: {0}")]
    NoFace(String),

    #[error("degenerate bounding box: {0}")]
    DegenerateBox(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("weight container: {0}")]
    Container(String),

    #[error("config fingerprint mismatch: container has {found}, expected {expected}")]
    Fingerprint { expected: String, found: String },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("calibration aborted: {0}")]
    CalibrationAborted(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("image: {0}")]
    Image(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GazeError {
    pub fn parse(source_name: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        GazeError::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GazeError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than a bug or environment failure.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, GazeError::Io { .. } | GazeError::NonFinite(_))
    }
}
