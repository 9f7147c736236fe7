//! Error type shared across the crate.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received a parameter outside its domain.
    InvalidParameter(String),
    /// A signal lies outside the distribution support.
    OutOfSupport { value: f64, lo: f64, hi: f64 },
    /// A probability argument lies outside [0, 1].
    InvalidProbability(f64),
    /// Order-statistic rank outside 1..=n.
    InvalidRank { m: usize, n: usize },
    /// A signal vector has the wrong number of entries.
    WrongLength { expected: usize, got: usize },
    /// A root-finding problem has no solution in the admissible range.
    NoSolution(String),
    /// Quadrature failed to reach the requested tolerance.
    QuadratureNonConvergence { achieved: f64, requested: f64 },
    /// The distribution violates a contract assumed by the caller
    /// (e.g. a vanishing density at an interior point).
    DistributionContract(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfSupport { value, lo, hi } => {
                write!(f, "signal {value} outside support [{lo}, {hi}]")
            }
            Error::InvalidProbability(x) => write!(f, "probability {x} outside [0, 1]"),
            Error::InvalidRank { m, n } => write!(f, "order-statistic rank {m} invalid for n={n}"),
            Error::WrongLength { expected, got } => {
                write!(f, "expected {expected} signals, got {got}")
            }
            Error::NoSolution(msg) => write!(f, "no solution: {msg}"),
            Error::QuadratureNonConvergence { achieved, requested } => write!(
                f,
                "quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}"
            ),
            Error::DistributionContract(msg) => write!(f, "distribution contract violated: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
