use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bias p = {0} is outside [1/2, 1]")]
    InvalidBias(f64),
    #[error("invalid probability ratio {num}/{den}")]
    InvalidRatio { num: u64, den: u64 },
    #[error("cannot parse probability {0:?}")]
    Parse(alloc::string::String),
    #[error("no stationary distribution at p = 1/2")]
    NoStationaryDistribution,
    #[error("exact arithmetic needs p given as a ratio of integers")]
    NotRational,
    #[error("exact arithmetic is capped at n = {cap}, got n = {n}")]
    ExactSizeExceeded { n: usize, cap: usize },
    #[error("overflow cap {cap} must exceed 2n = {twice_n}")]
    InvalidGuard { cap: f64, twice_n: usize },
    #[error("n must be at least {min}, got {n}")]
    SizeTooSmall { n: usize, min: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("exhaustive enumeration is capped at n = {cap}, got n = {n}")]
    EnumerationTooLarge { n: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector norm {0} is not 1")]
    NotUnitVector(f64),
    #[error("eigensolver did not converge after {0} rotations")]
    NoConvergence(usize),
}
