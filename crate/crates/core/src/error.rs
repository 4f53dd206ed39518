use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value outside a function's domain (e.g. evaluating past the end).
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller supplied arguments that violate a precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// A strategy or responder broke the round protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Malformed input text (rationals, symbols, JSON documents).
    #[error("parse error: {0}")]
    Parse(String),
    /// Unknown catalog entries or invalid parameters for them.
    #[error("configuration error: {0}")]
    Config(String),
    /// Internal state that cannot arise from a correct run.
    #[error("inconsistency: {0}")]
    Inconsistency(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
