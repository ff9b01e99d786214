use std::path::PathBuf;

use bcd_core::DesignParams;
use clap::{Args, Parser, Subcommand};

use crate::record::{Format, Mode};

fn parse_p(s: &str) -> Result<DesignParams, String> {
    s.parse::<DesignParams>().map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "bcd",
    version,
    about = "Exact and simulated properties of Efron's biased coin design BCD(p)"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// `float` uses overflow-safe f64; `rational` is exact (p as a ratio, n <= 256).
    #[arg(long, global = true, value_enum, default_value_t = Mode::Float)]
    pub mode: Mode,
    /// Worker threads for grids and simulation (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distribution of the imbalance D_n, or one mass P(D_n = k).
    Pmf(PmfArgs),
    /// Var(D_n).
    Var(SizeArgs),
    /// Limiting distribution of |D_n| and related limits.
    Stationary(StationaryArgs),
    /// First n from which steady-state probabilities stay within tolerance.
    #[command(alias = "table1")]
    Threshold(ThresholdArgs),
    /// Var(D_n) grid with its n -> infinity rows.
    Table2(GridArgs),
    /// Average excess selection bias grid with its n -> infinity row.
    Table3(GridArgs),
    /// Covariance matrix of the assignments T_1..T_n.
    Sigma(SigmaArgs),
    /// Eigenvalues of the covariance matrix.
    Eigen(EigenArgs),
    /// Expected correct guesses under the least-frequent-arm strategy.
    SelectionBias(SelectionBiasArgs),
    /// z' Sigma z for a unit covariate vector z.
    AccidentalBias(AccidentalBiasArgs),
    /// Exact variance (and optional Monte Carlo p-value) of a linear rank statistic.
    Ranktest(RanktestArgs),
    /// Monte Carlo estimate of a path statistic next to its exact value.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[arg(long)]
    pub n: usize,
    /// Bias p, decimal or ratio such as 2/3.
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Only this imbalance value.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
}

#[derive(Debug, Args)]
pub struct StationaryArgs {
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Largest |D| listed.
    #[arg(long, default_value_t = 10)]
    pub k: u64,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_delimiter = ',', default_values = ["0", "1", "2", "25", "50"])]
    pub k: Vec<u64>,
    #[arg(long, value_parser = parse_p, value_delimiter = ',', default_values = ["0.6", "0.7", "0.8", "0.9"])]
    pub p: Vec<DesignParams>,
    /// Relative tolerances.
    #[arg(long, value_delimiter = ',', default_values = ["0.1", "0.05", "0.01", "0.001"])]
    pub tol: Vec<String>,
    #[arg(long, default_value_t = 500)]
    pub n_max: u64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Sizes; defaults to the standard grid of the command.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_parser = parse_p, value_delimiter = ',', default_values = ["0.6", "0.7", "0.8", "0.9"])]
    pub p: Vec<DesignParams>,
    /// Leave out the n -> infinity rows.
    #[arg(long)]
    pub no_limit: bool,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Append the eigenvalues.
    #[arg(long)]
    pub eigen: bool,
    /// Report the largest eigenvalue against 2p.
    #[arg(long)]
    pub check_conjecture: bool,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Off-diagonal convergence tolerance of the Jacobi sweeps.
    #[arg(long, default_value_t = bcd_core::eigen::DEFAULT_TOL)]
    pub tol: f64,
    /// Give up (exit status 3) after this many rotations; default 100 n^2.
    #[arg(long)]
    pub max_rotations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectionBiasArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Also list the guessing probability of every step.
    #[arg(long)]
    pub per_step: bool,
}

#[derive(Debug, Args)]
pub struct AccidentalBiasArgs {
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Covariate vector, CSV (one value per line) or JSON array.
    #[arg(long, value_name = "FILE")]
    pub z: PathBuf,
    /// Expected length of z.
    #[arg(long)]
    pub n: Option<usize>,
    /// Scale z to unit length first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct RanktestArgs {
    /// Scores a_n, CSV (one value per line) or JSON array.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// Expected number of scores.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    /// Replace the values by their centered ranks.
    #[arg(long)]
    pub ranks: bool,
    /// Subtract the mean from the scores.
    #[arg(long)]
    pub center: bool,
    /// Observed assignments (1/-1 or A/B per line); drawn from --seed otherwise.
    #[arg(long, value_name = "FILE")]
    pub assignments: Option<PathBuf>,
    /// Also estimate the p-value and sd of W by simulation.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// balance, variance, selection-bias or cov(i,j).
    #[arg(long)]
    pub statistic: String,
    /// Sequence length; defaults to the largest index for cov(i,j).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_p)]
    pub p: DesignParams,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
