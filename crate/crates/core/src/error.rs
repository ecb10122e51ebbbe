use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV data: {0}")]
    Format(String),

    #[error("unsupported WAV encoding: format tag {format_tag}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },

    #[error("sample rate {found} Hz does not match the configured {expected} Hz")]
    RateMismatch { expected: u32, found: u32 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate utterance id {0:?}")]
    DuplicateUtterance(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal of {len} samples is shorter than one {win_length}-sample window")]
    TooShort { len: usize, win_length: usize },

    #[error("mel filter {index} has no support at n_fft={n_fft}; reduce n_mels or raise n_fft")]
    Resolution { index: usize, n_fft: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cost model rejected: {0}")]
    CostModel(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("bad file {what}: {message}")]
    BadFile { what: &'static str, message: String },

    #[error("score sets differ: {0}")]
    UtteranceMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn bad_file(what: &'static str, message: impl Into<String>) -> Self {
        Error::BadFile {
            what,
            message: message.into(),
        }
    }
}
