use std::io;

use thiserror::Error;

/// Errors raised by the ranking, data and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation
    /// (invalid index, duplicate item, masked pixel, bad dimensions, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The input is too small (or too large) for the requested work.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// A file did not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),
    /// The least-squares normal matrix is singular.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    /// A metric has no retained terms to average over.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    /// The likelihood has no finite maximizer for the observed rankings.
    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn capacity(msg: impl Into<String>) -> Error {
    Error::Capacity(msg.into())
}

pub(crate) fn format(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
