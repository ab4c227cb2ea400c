//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoselectError>;

#[derive(Debug, Error)]
pub enum CoselectError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("evaluation error: {0}")]
    Eval(String),
}

impl CoselectError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoselectError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        CoselectError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
