use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Bad magic, unsupported version, or malformed field.
    #[error("format error: {0}")]
    Format(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("header error: {0}")]
    Header(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("no channel of kind {0} in recording")]
    EmptySelection(String),

    /// An operation would produce an empty or otherwise unusable result.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value in {layer}")]
    Numeric { layer: String },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(layer: impl Into<String>) -> Self {
        Error::Numeric { layer: layer.into() }
    }
}
