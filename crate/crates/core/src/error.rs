use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Side, Site};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate detection: {side} identity `{identity}` has two rows at camera {} frame {} (row {row})", site.camera, site.frame)]
    DuplicateDetection {
        side: Side,
        identity: String,
        site: Site,
        /// 0-based index of the offending row within its side's input.
        row: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate projection: homogeneous w = {w:e}")]
    DegenerateProjection { w: f64 },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(&'static str),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error comes from bad user input (as opposed to the environment).
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Json(_))
    }
}
