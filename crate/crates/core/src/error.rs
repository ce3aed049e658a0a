//! Error type shared by the library.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters p = {p}, q = {q}: require 0 < q < p <= 1")]
    InvalidPair { p: f64, q: f64 },

    #[error("invalid operator degree n = {0}: require n >= 1")]
    InvalidDegree(u32),

    #[error("{name} = {value} is outside {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("binomial index k = {k} exceeds n = {n}")]
    BinomialIndex { n: u64, k: u64 },

    #[error("Pascal relation needs 1 <= k <= n-1, got n = {n}, k = {k}")]
    PascalIndex { n: u64, k: u64 },

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("function domain error at t = {at}: {reason}")]
    Domain { at: f64, reason: String },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("exact oracle cap exceeded: {0}")]
    OracleCap(String),

    #[error("invalid sequence scheme '{name}': {reason}")]
    InvalidScheme { name: String, reason: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
