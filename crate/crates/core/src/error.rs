//! Error type shared across the crate.

use std::fmt;

/// Errors produced by the model, the solvers and the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    Domain(String),
    /// The rate exponent exceeded the cap; the energy expression would
    /// overflow instead of producing a meaningful value.
    Overflow { exponent: f64, cap: f64 },
    /// A root-finding bracket is invalid or holds no sign change.
    Bracket(String),
    /// A schedule with no participating device was handed to a solver that
    /// requires at least one.
    InfeasibleSchedule(String),
    /// Problem size outside the supported range of a brute-force oracle.
    Dimension(String),
    /// An invalid configuration value.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Overflow { exponent, cap } => write!(
                f,
                "energy exponent {exponent} exceeds the overflow cap of {cap} bits"
            ),
            Error::Bracket(msg) => write!(f, "bracket error: {msg}"),
            Error::InfeasibleSchedule(msg) => write!(f, "infeasible schedule: {msg}"),
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
