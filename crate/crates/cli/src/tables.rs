//! Threshold, variance and selection-bias grids with their default layouts.

use std::fmt;

use bcd_core::bias::{
    asymptotic_excess, asymptotic_excess_exact, average_excess_exact, total_selection_bias,
};
use bcd_core::numeric::MAX_EXACT_N;
use bcd_core::pmf::{var_dn, var_dn_exact};
use bcd_core::stationary::{
    asymptotic_var, asymptotic_var_exact, steady_state_thresholds, steady_state_thresholds_exact,
    Parity, Threshold,
};
use bcd_core::DesignParams;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::record::Mode;

pub const DEFAULT_P: [(u64, u64); 4] = [(3, 5), (7, 10), (4, 5), (9, 10)];
pub const THRESHOLD_K: [u64; 5] = [0, 1, 2, 25, 50];
pub const THRESHOLD_TOLS: [&str; 4] = ["0.1", "0.05", "0.01", "0.001"];
pub const THRESHOLD_N_MAX: u64 = 500;
pub const VARIANCE_N: [usize; 9] = [10, 20, 50, 100, 200, 5, 15, 25, 75];
pub const EXCESS_N: [usize; 9] = [5, 10, 15, 20, 25, 50, 75, 100, 200];
pub const VARIANCE_DECIMALS: usize = 2;
pub const EXCESS_DECIMALS: usize = 3;

pub fn default_params() -> Vec<DesignParams> {
    DEFAULT_P
        .iter()
        .map(|&(a, b)| DesignParams::from_ratio(a, b).expect("valid default p"))
        .collect()
}

/// `value` to `decimals` places. The decimal expansion of the f64 is rounded,
/// with exact binary ties going to even.
pub fn round_to(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}

pub fn exact_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn exact_string(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `a/b` or a plain decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        return (b != BigInt::from(0)).then(|| BigRational::new(a, b));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let numer: BigInt = format!("{int}{frac}").parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let x = BigRational::new(numer, denom);
    Some(if negative { -x } else { x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    /// `n -> infinity`, along one parity when the limit depends on it.
    Limit(Option<Parity>),
}

impl Horizon {
    pub fn parity_label(&self) -> &'static str {
        match self {
            Horizon::Finite(n) if n % 2 == 0 => "even",
            Horizon::Finite(_) => "odd",
            Horizon::Limit(Some(Parity::Even)) => "even",
            Horizon::Limit(Some(Parity::Odd)) => "odd",
            Horizon::Limit(None) => "",
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Limit(_) => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub horizon: Horizon,
    pub params: DesignParams,
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl GridCell {
    /// Rounded from the exact value when there is one.
    pub fn rounded(&self, decimals: usize) -> String {
        round_to(
            self.exact.as_ref().map(exact_to_f64).unwrap_or(self.value),
            decimals,
        )
    }
}

/// Even sizes, then the even limit, then odd sizes and the odd limit.
pub fn variance_layout(ns: &[usize], limits: bool) -> Vec<Horizon> {
    let mut out = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let sizes: Vec<Horizon> = ns
            .iter()
            .filter(|&&n| Parity::of(n as u64) == parity)
            .map(|&n| Horizon::Finite(n))
            .collect();
        if sizes.is_empty() {
            continue;
        }
        out.extend(sizes);
        if limits {
            out.push(Horizon::Limit(Some(parity)));
        }
    }
    out
}

pub fn excess_layout(ns: &[usize], limits: bool) -> Vec<Horizon> {
    let mut out: Vec<Horizon> = ns.iter().map(|&n| Horizon::Finite(n)).collect();
    if limits {
        out.push(Horizon::Limit(None));
    }
    out
}

fn exact_allowed(params: &DesignParams, horizon: Horizon) -> bool {
    params.is_exact()
        && match horizon {
            Horizon::Finite(n) => n <= MAX_EXACT_N,
            Horizon::Limit(_) => true,
        }
}

/// Evaluates every `(horizon, p)` cell in parallel, row-major by horizon.
///
/// In float mode the exact value is still attached when `p` is a ratio and
/// the size is within the exact cap, so that rounding is done on it. Rational
/// mode requires it.
fn grid<F, E>(
    horizons: &[Horizon],
    ps: &[DesignParams],
    mode: Mode,
    float: F,
    exact: E,
) -> CliResult<Vec<GridCell>>
where
    F: Fn(Horizon, DesignParams) -> bcd_core::Result<f64> + Sync,
    E: Fn(Horizon, DesignParams) -> bcd_core::Result<BigRational> + Sync,
{
    let cells: Vec<(Horizon, DesignParams)> = horizons
        .iter()
        .flat_map(|&h| ps.iter().map(move |&p| (h, p)))
        .collect();
    cells
        .into_par_iter()
        .map(|(horizon, params)| {
            let exact = if mode == Mode::Rational || exact_allowed(&params, horizon) {
                Some(exact(horizon, params)?)
            } else {
                None
            };
            let value = match (&exact, mode) {
                (Some(x), Mode::Rational) => exact_to_f64(x),
                _ => float(horizon, params)?,
            };
            Ok(GridCell {
                horizon,
                params,
                value,
                exact,
            })
        })
        .collect()
}

pub fn variance_grid(
    horizons: &[Horizon],
    ps: &[DesignParams],
    mode: Mode,
) -> CliResult<Vec<GridCell>> {
    grid(
        horizons,
        ps,
        mode,
        |h, p| match h {
            Horizon::Finite(n) => var_dn(n, p),
            Horizon::Limit(parity) => asymptotic_var(p, parity.unwrap_or(Parity::Even)),
        },
        |h, p| match h {
            Horizon::Finite(n) => var_dn_exact(n, p),
            Horizon::Limit(parity) => asymptotic_var_exact(p, parity.unwrap_or(Parity::Even)),
        },
    )
}

pub fn excess_grid(
    horizons: &[Horizon],
    ps: &[DesignParams],
    mode: Mode,
) -> CliResult<Vec<GridCell>> {
    grid(
        horizons,
        ps,
        mode,
        |h, p| match h {
            Horizon::Finite(n) => Ok((total_selection_bias(n, p)? - n as f64 / 2.0) / n as f64),
            Horizon::Limit(_) => Ok(asymptotic_excess(p)),
        },
        |h, p| match h {
            Horizon::Finite(n) => average_excess_exact(n, p),
            Horizon::Limit(_) => asymptotic_excess_exact(p),
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCell {
    pub k: u64,
    pub params: DesignParams,
    pub tol: String,
    pub threshold: Threshold,
}

/// Steady-state thresholds for every `(k, p)` and each tolerance, row-major
/// by `k`, then `p`, then tolerance.
pub fn threshold_grid(
    ks: &[u64],
    ps: &[DesignParams],
    tols: &[String],
    n_max: u64,
    mode: Mode,
) -> CliResult<Vec<ThresholdCell>> {
    let float_tols = tols
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v > 0.0 => Ok(v),
            _ => Err(CliError::usage(format!(
                "tolerance {t:?} must be a positive number"
            ))),
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let exact_tols = if mode == Mode::Rational {
        tols.iter()
            .map(|t| {
                parse_rational(t).ok_or_else(|| {
                    CliError::usage(format!("tolerance {t:?} is not a decimal or ratio"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let pairs: Vec<(u64, DesignParams)> = ks
        .iter()
        .flat_map(|&k| ps.iter().map(move |&p| (k, p)))
        .collect();
    let per_pair = pairs
        .par_iter()
        .map(|&(k, params)| match mode {
            Mode::Float => steady_state_thresholds(k, params, &float_tols, n_max),
            Mode::Rational => steady_state_thresholds_exact(k, params, &exact_tols, n_max),
        })
        .collect::<bcd_core::Result<Vec<_>>>()?;
    Ok(pairs
        .iter()
        .zip(per_pair)
        .flat_map(|(&(k, params), found)| {
            tols.iter()
                .zip(found)
                .map(move |(tol, threshold)| ThresholdCell {
                    k,
                    params,
                    tol: tol.clone(),
                    threshold,
                })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_uses_the_binary_value() {
        // 609/200 is stored just below 3.045, 3.205 just above
        assert_eq!(round_to(3.045, 2), "3.04");
        assert_eq!(round_to(3.205, 2), "3.21");
        assert_eq!(round_to(0.1875, 3), "0.188");
        assert_eq!(round_to(0.0625, 3), "0.062");
    }

    #[test]
    fn rationals_parse() {
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(parse_rational("0.001"), Some(r(1, 1000)));
        assert_eq!(parse_rational("2/3"), Some(r(2, 3)));
        assert_eq!(parse_rational("-1.25"), Some(r(-5, 4)));
        assert_eq!(parse_rational("7"), Some(r(7, 1)));
        assert_eq!(parse_rational("1e-3"), None);
        assert_eq!(parse_rational("."), None);
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn layouts() {
        let v = variance_layout(&[10, 5, 20], true);
        assert_eq!(
            v,
            vec![
                Horizon::Finite(10),
                Horizon::Finite(20),
                Horizon::Limit(Some(Parity::Even)),
                Horizon::Finite(5),
                Horizon::Limit(Some(Parity::Odd)),
            ]
        );
        assert_eq!(excess_layout(&[5], false), vec![Horizon::Finite(5)]);
    }

    #[test]
    fn single_cells() {
        let p = |a, b| DesignParams::from_ratio(a, b).unwrap();
        let v = variance_grid(&[Horizon::Finite(200)], &[p(3, 5)], Mode::Float).unwrap();
        assert_eq!(v[0].rounded(2), "12.45");
        let v = variance_grid(
            &[Horizon::Limit(Some(Parity::Odd))],
            &[p(7, 10)],
            Mode::Float,
        )
        .unwrap();
        assert_eq!(v[0].rounded(2), "3.21");
        let e = excess_grid(
            &[Horizon::Finite(50), Horizon::Limit(None)],
            &[p(9, 10)],
            Mode::Rational,
        )
        .unwrap();
        assert_eq!(e[0].rounded(3), "0.221");
        assert_eq!(e[1].rounded(3), "0.222");
        let t = threshold_grid(
            &[0, 2],
            &[p(9, 10), p(7, 10)],
            &["0.001".into(), "0.05".into()],
            500,
            Mode::Float,
        )
        .unwrap();
        let find = |k, params: DesignParams, tol: &str| {
            t.iter()
                .find(|c| c.k == k && c.params == params && c.tol == tol)
                .unwrap()
                .threshold
        };
        assert_eq!(find(0, p(9, 10), "0.001"), Threshold::At(6));
        assert_eq!(find(2, p(7, 10), "0.05"), Threshold::At(4));
    }

    #[test]
    fn rational_mode_needs_exact_inputs() {
        let float_p = DesignParams::new(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!(variance_grid(&[Horizon::Finite(10)], &[float_p], Mode::Rational).is_err());
        let p = DesignParams::from_ratio(3, 5).unwrap();
        assert!(variance_grid(&[Horizon::Finite(300)], &[p], Mode::Rational).is_err());
        assert!(variance_grid(&[Horizon::Finite(300)], &[p], Mode::Float).is_ok());
    }
}
