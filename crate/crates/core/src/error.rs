use std::io;

use thiserror::Error;

use crate::tree::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("label {0} has no leaf in the tree")]
    UnknownLabel(u32),

    #[error("label {0} already has a leaf in the tree")]
    DuplicateLabel(u32),

    #[error("node {0} has no auxiliary classifier")]
    MissingAuxiliary(NodeId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("{0}")]
    Logic(String),
}

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}
