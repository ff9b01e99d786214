//! Exact finite-sample properties of Efron's biased coin design BCD(p).
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs:
//!
//! * [`pmf`]: the distribution of the imbalance `D_n`, its variance, and a
//!   forward-recurrence oracle.
//! * [`stationary`]: the limiting distribution of `|D_n|` and convergence
//!   thresholds.
//! * [`covariance`]: first-visit probabilities, conditional and joint
//!   assignment probabilities, and the covariance matrix of the assignments.
//! * [`eigen`]: a dense symmetric eigensolver for that matrix.
//! * [`bias`]: selection and accidental bias.
//! * [`simulate`]: sequence generation, exhaustive enumeration, Monte Carlo
//!   estimation and linear rank statistics.
//!
//! Closed forms are evaluated either in `f64` with an overflow/underflow
//! aware product kernel, or exactly over big rationals (see [`numeric`]).

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bias;
pub mod covariance;
pub mod eigen;
mod error;
pub mod numeric;
mod params;
pub mod pmf;
pub mod simulate;
pub mod stationary;

pub use crate::error::{Error, Result};
pub use crate::numeric::NumericMode;
pub use crate::params::DesignParams;
