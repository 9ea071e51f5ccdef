use thiserror::Error;

use crate::params::RegimeTag;

/// Errors produced by the library. Every variant names the offending
/// quantity so the CLI can surface it verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter vector must be non-empty")]
    Empty,

    #[error("entry {index} is {value}, outside [0, 1]")]
    EntryOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {n} exceeds the exact-enumeration limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },

    #[error("subset universe of size {n} exceeds the 64-bit mask capacity")]
    UniverseTooLarge { n: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("slice {k} out of range 0..={n}")]
    SliceOutOfRange { k: usize, n: usize },

    #[error("odds undefined at index {index}: probability equals 1")]
    OddsUndefined { index: usize },

    #[error("sum of odds {sum} exceeds 1")]
    OddsConstraintViolated { sum: f64 },

    #[error("lambda {lambda} exceeds 1/(N+1) = {max}")]
    LambdaTooLarge { lambda: f64, max: f64 },

    #[error("pair is in the {actual:?} regime but the check requires {required:?}")]
    RegimeMismatch { required: RegimeTag, actual: RegimeTag },

    #[error("n = {n} is below the minimum {min}")]
    NTooSmall { n: usize, min: usize },

    #[error("pair is not quasi-symmetric at indices {indices:?}")]
    NotQuasiSymmetric { indices: Vec<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
