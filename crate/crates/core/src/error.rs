use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("zero-length audio in {0}")]
    ZeroLength(PathBuf),

    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedCodec { path: PathBuf, detail: String },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("silent input: signal-to-noise ratio is undefined")]
    SilentInput,

    #[error("constant signal: clipping percentile is degenerate")]
    ConstantSignal,

    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("spectrogram too small: {0}")]
    TooSmall(String),

    #[error("bad spectrogram file format: {0}")]
    BadFormat(String),

    #[error("truncated spectrogram payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("transform `{name}` failed: {source}")]
    Transform {
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("protocol {protocol} cannot be applied to {item} input")]
    DomainMismatch {
        protocol: &'static str,
        item: &'static str,
    },

    #[error("empty same-class pool for mixing transform")]
    EmptyPool,

    #[error("manifest {path}, line {line}: {detail}")]
    Manifest {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("score file {path}, line {line}: {detail}")]
    Schema {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("test-fold leakage: {0}")]
    Leakage(String),

    #[error("fusion mismatch: {0}")]
    FusionMismatch(String),

    #[error("empty score matrix")]
    EmptyMatrix,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_transform(name: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Transform {
            name,
            source: Box::new(source),
        }
    }

    /// True for errors caused by malformed user input (schemas, parameters)
    /// rather than processing failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Manifest { .. }
                | Error::DuplicateId(_)
                | Error::Schema { .. }
                | Error::DomainMismatch { .. }
        )
    }
}
