use thiserror::Error;

/// Errors raised by the library. Diagnostics that are meant to be reported
/// (triangle defects, MCP slacks, verdicts) are returned as values instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point index {index} out of range for space with {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("ball around {center} of radius {radius} is empty")]
    EmptyBall { center: usize, radius: f64 },

    #[error("no chain connects {from} and {to} in the neighbor graph")]
    Disconnected { from: usize, to: usize },

    #[error("measure has no positive atoms")]
    EmptySupport,

    #[error("total masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("support too large: {rows}x{cols} exceeds {limit}x{limit}")]
    SupportTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver did not converge after {0} pivots")]
    NoConvergence(usize),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
