use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the framework.
///
/// Variants map one-to-one onto the error codes used in config diagnostics
/// and CLI messages (see [`Error::code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("heterogeneous transition group: {0}")]
    HeterogeneousGroup(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode is over")]
    EpisodeOver,
    #[error("invalid action {index} (action space has {count} actions)")]
    InvalidAction { index: usize, count: usize },
    #[error("invalid distance {0} m")]
    InvalidDistance(f64),
    #[error("mirror divergence at step {step}: {detail}")]
    MirrorDivergence { step: u64, detail: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeMismatch {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("line {line}: missing required key `{key}`")]
    MissingRequired { line: usize, key: String },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable upper-case code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidState(_) => "INVALID_STATE",
            Error::HeterogeneousGroup(_) => "HETEROGENEOUS_GROUP",
            Error::EmptyGroup => "EMPTY_GROUP",
            Error::Config(_) => "CONFIG_ERROR",
            Error::EpisodeOver => "EPISODE_OVER",
            Error::InvalidAction { .. } => "INVALID_ACTION",
            Error::InvalidDistance(_) => "INVALID_DISTANCE",
            Error::MirrorDivergence { .. } => "MIRROR_DIVERGENCE",
            Error::Numeric(_) => "NUMERIC_ERROR",
            Error::Shape(_) => "SHAPE_ERROR",
            Error::UnknownKey { .. } => "UNKNOWN_KEY",
            Error::TypeMismatch { .. } => "TYPE_MISMATCH",
            Error::MissingRequired { .. } => "MISSING_REQUIRED",
            Error::Checkpoint(_) => "CHECKPOINT_ERROR",
            Error::Io { .. } => "IO_ERROR",
        }
    }

    /// True for errors caused by the experiment definition rather than by running it.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownKey { .. }
                | Error::TypeMismatch { .. }
                | Error::MissingRequired { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
