use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("piece id {0} is out of range for this vocabulary")]
    UnknownId(u32),

    #[error("unsupported model format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt model (line {line}): {reason}")]
    CorruptModel { line: usize, reason: String },

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
