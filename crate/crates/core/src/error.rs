use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pixel ({x}, {y}) is out of bounds for this operation")]
    OutOfBounds { x: usize, y: usize },

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("failed to load frame {path}: {source}")]
    FrameLoadFailure {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("class `{0}` has no usable images")]
    EmptyClass(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("class {label} has {count} sample(s); at least 2 are required")]
    ClassTooSmall { label: u8, count: usize },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("fingerprint mismatch: model expects {expected}, data has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("unsupported file version {found} (this build reads {supported})")]
    VersionMismatch { found: String, supported: String },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("{phase} workload failed: {source}")]
    WorkloadFailure {
        phase: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the caller's
    /// parameters or by the program itself.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InvalidParameter(_) => false,
            Error::WorkloadFailure { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}
