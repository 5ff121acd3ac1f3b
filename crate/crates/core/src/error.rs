use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed binary or text file; `offset` is the byte (or line) position
    /// where parsing failed.
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("model load error: {0}")]
    Load(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("undefined weight: {0}")]
    UndefinedWeight(String),

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Load(_) => "load",
            Error::Divergence(_) => "divergence",
            Error::UndefinedWeight(_) => "undefined_weight",
            Error::Normalization(_) => "normalization",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::TrainingAborted(_) => "training_aborted",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }
}
