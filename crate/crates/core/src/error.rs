use std::path::PathBuf;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("operation not supported for this scene variant: {0}")]
    UnsupportedScene(&'static str),

    #[error("degenerate observation: {valid} valid feature nodes, need at least {required}")]
    DegenerateObservation { valid: usize, required: usize },

    #[error("ill-conditioned damped normal matrix (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("task generation failed after {attempts} attempts: {reason}")]
    TaskGeneration { attempts: usize, reason: String },

    #[error("provider file for iteration {iteration} ({path}): {source}")]
    Provider {
        iteration: usize,
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
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
}
