//! Command-line driver for `bcd-core`: table regeneration, on-demand exact
//! quantities, oracles and Monte Carlo, with CSV or JSON output.

pub mod cli;
pub mod commands;
pub mod error;
pub mod input;
pub mod montecarlo;
pub mod record;
pub mod tables;

pub use crate::error::{CliError, CliResult};
pub use crate::record::{Cell, Format, Mode, OutputRecord, Row};
