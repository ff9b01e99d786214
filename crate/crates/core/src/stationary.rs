//! Limiting behaviour of `|D_n|` and convergence thresholds.

use alloc::vec;
use alloc::vec::Vec;
use num_rational::BigRational;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{Arith, Exact, NumericMode, StableFloat};
use crate::params::DesignParams;
use crate::pmf::mass_with;

/// Stationary distribution `pi_j` of the `|D_n|` chain (period two, reflecting
/// at zero). Exists for `p > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryDist {
    params: DesignParams,
}

impl StationaryDist {
    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// `pi_0 = (r - 1) / 2r`, `pi_j = (r^2 - 1) / (2 r^(j + 1))`.
    ///
    /// At `p = 1` the limits `pi_0 = pi_1 = 1/2` are returned.
    pub fn pi(&self, j: u64) -> f64 {
        if self.params.is_deterministic() {
            return if j <= 1 { 0.5 } else { 0.0 };
        }
        let r = self.params.r();
        if j == 0 {
            (r - 1.0) / (2.0 * r)
        } else {
            (r * r - 1.0) / (2.0 * libm::pow(r, (j + 1) as f64))
        }
    }

    /// Exact `pi_j`; needs `p` as a ratio.
    pub fn pi_exact(&self, j: u64) -> Result<BigRational> {
        let exact = Exact::new(self.params)?;
        Ok(limit_abs_mass_with(&exact, j) * exact.half())
    }

    /// Limit of `P(|D_n| = j)` along `n` of the same parity as `j`.
    pub fn limit_abs_mass(&self, j: u64) -> f64 {
        2.0 * self.pi(j)
    }

    /// `lim P(D_2m = 0) = (r - 1) / r`.
    pub fn balance_limit(&self) -> f64 {
        self.limit_abs_mass(0)
    }

    /// `lim P(|D_2m+1| = 1) = (r^2 - 1) / r^2`.
    pub fn unit_imbalance_limit(&self) -> f64 {
        self.limit_abs_mass(1)
    }
}

pub fn stationary_pmf(params: DesignParams) -> Result<StationaryDist> {
    if params.is_fair() {
        return Err(Error::NoStationaryDistribution);
    }
    Ok(StationaryDist { params })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: u64) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

fn asymptotic_var_with<A: Arith>(arith: &A, parity: Parity) -> A::Value {
    let one = A::Value::one();
    if arith.params().is_deterministic() {
        return match parity {
            Parity::Even => A::Value::zero(),
            Parity::Odd => one,
        };
    }
    let r = arith.p() / arith.q();
    let r2 = r.clone() * r.clone();
    let denom = (r2.clone() - one.clone()) * (r2.clone() - one.clone());
    let four = arith.constant(4, 1);
    match parity {
        Parity::Even => four * r * (r2 + one) / denom,
        Parity::Odd => arith.constant(8, 1) * r2 / denom + one,
    }
}

/// Variance of the imbalance under the limiting distribution.
pub fn asymptotic_var(params: DesignParams, parity: Parity) -> Result<f64> {
    if params.is_fair() {
        return Err(Error::NoStationaryDistribution);
    }
    Ok(asymptotic_var_with(
        &StableFloat::for_size(params, 1),
        parity,
    ))
}

pub fn asymptotic_var_exact(params: DesignParams, parity: Parity) -> Result<BigRational> {
    if params.is_fair() {
        return Err(Error::NoStationaryDistribution);
    }
    Ok(asymptotic_var_with(&Exact::new(params)?, parity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// First `n` from which the tolerance holds for every later `n` of the
    /// same parity up to the horizon.
    At(u64),
    /// Not reached by the horizon (printed as `>n_max`).
    Exceeds(u64),
}

impl core::fmt::Display for Threshold {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Threshold::At(n) => write!(f, "{n}"),
            Threshold::Exceeds(n) => write!(f, ">{n}"),
        }
    }
}

/// `lim P(|D_n| = k)` along `n` of the parity of `k`, i.e. `2 pi_k`.
fn limit_abs_mass_with<A: Arith>(arith: &A, k: u64) -> A::Value {
    if arith.params().is_deterministic() {
        return if k <= 1 {
            A::Value::one()
        } else {
            A::Value::zero()
        };
    }
    let one = A::Value::one();
    let r = arith.p() / arith.q();
    if k == 0 {
        return (r.clone() - one) / r;
    }
    let mut power = r.clone();
    for _ in 0..k {
        power = power * r.clone();
    }
    (r.clone() * r - one) / power
}

fn relative_error_with<A: Arith>(arith: &A, limit: &A::Value, n: u64, k: u64) -> Option<A::Value> {
    let one_side = mass_with(arith, n as usize, k as i64);
    let exact = if k == 0 {
        one_side
    } else {
        one_side.clone() + one_side
    };
    if exact.is_zero() {
        return None;
    }
    let diff = limit.clone() - exact.clone();
    let diff = if diff < A::Value::zero() { -diff } else { diff };
    Some(diff / exact)
}

/// Relative error `|2 pi_k - P(|D_n| = k)| / P(|D_n| = k)`; infinite when
/// the mass is zero.
pub fn steady_state_error(n: u64, k: u64, params: DesignParams, mode: NumericMode) -> Result<f64> {
    stationary_pmf(params)?;
    let size = n.max(1) as usize;
    if mode.is_exact() {
        let exact = Exact::for_size(params, size)?;
        let limit = limit_abs_mass_with(&exact, k);
        return Ok(
            relative_error_with(&exact, &limit, n, k).map_or(f64::INFINITY, |e| exact.to_f64(&e))
        );
    }
    let float = StableFloat::new(params, mode.guards(size)?);
    let limit = limit_abs_mass_with(&float, k);
    Ok(relative_error_with(&float, &limit, n, k).unwrap_or(f64::INFINITY))
}

fn thresholds_with<A: Arith>(arith: &A, k: u64, tols: &[A::Value], n_max: u64) -> Vec<Threshold> {
    let limit = limit_abs_mass_with(arith, k);
    let mut out = vec![Threshold::Exceeds(n_max); tols.len()];
    let mut n = if k == 0 { 2 } else { k };
    while n <= n_max {
        let err = relative_error_with(arith, &limit, n, k);
        for (slot, tol) in out.iter_mut().zip(tols) {
            match &err {
                Some(e) if e <= tol => {
                    if *slot == Threshold::Exceeds(n_max) {
                        *slot = Threshold::At(n);
                    }
                }
                _ => *slot = Threshold::Exceeds(n_max),
            }
        }
        n += 2;
    }
    out
}

fn check_scan(k: u64, params: DesignParams, n_max: u64) -> Result<()> {
    if n_max < k {
        return Err(Error::InvalidArgument("n_max must be at least k"));
    }
    stationary_pmf(params)?;
    Ok(())
}

/// Smallest `n` (same parity as `k`, `n >= max(k, 1)`, and `n >= 2` for
/// `k = 0`) from which the steady-state approximation of `P(|D_n| = k)`
/// stays within relative tolerance `tol` for all same-parity `n <= n_max`.
pub fn steady_state_threshold(
    k: u64,
    params: DesignParams,
    tol: f64,
    n_max: u64,
) -> Result<Threshold> {
    Ok(steady_state_thresholds(k, params, &[tol], n_max)?[0])
}

/// Thresholds for several tolerances in one pass over `n`.
pub fn steady_state_thresholds(
    k: u64,
    params: DesignParams,
    tols: &[f64],
    n_max: u64,
) -> Result<Vec<Threshold>> {
    if tols.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    check_scan(k, params, n_max)?;
    let float = StableFloat::for_size(params, n_max.max(1) as usize);
    Ok(thresholds_with(&float, k, tols, n_max))
}

/// [`steady_state_thresholds`] with exact comparisons; `n_max` is limited by
/// [`MAX_EXACT_N`](crate::numeric::MAX_EXACT_N).
pub fn steady_state_thresholds_exact(
    k: u64,
    params: DesignParams,
    tols: &[BigRational],
    n_max: u64,
) -> Result<Vec<Threshold>> {
    if tols.iter().any(|t| !t.is_positive()) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    check_scan(k, params, n_max)?;
    let exact = Exact::for_size(params, n_max.max(1) as usize)?;
    Ok(thresholds_with(&exact, k, tols, n_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;

    #[test]
    fn two_thirds_limits() {
        let s = stationary_pmf(DesignParams::from_ratio(2, 3).unwrap()).unwrap();
        assert!((s.pi(0) - 0.25).abs() < 1e-15);
        assert!((s.balance_limit() - 0.5).abs() < 1e-15);
        let s = stationary_pmf(DesignParams::new(0.9).unwrap()).unwrap();
        assert!((s.balance_limit() - 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn exact_pi_matches_float() {
        for (a, b) in [(3, 5), (2, 3), (9, 10), (1, 1)] {
            let s = stationary_pmf(DesignParams::from_ratio(a, b).unwrap()).unwrap();
            for j in 0..12 {
                let exact = s.pi_exact(j).unwrap().to_f64().unwrap();
                assert!((exact - s.pi(j)).abs() < 1e-15, "p={a}/{b} j={j}");
            }
        }
        let s = stationary_pmf(DesignParams::from_ratio(2, 3).unwrap()).unwrap();
        assert_eq!(
            s.pi_exact(0).unwrap(),
            BigRational::new(BigInt::from(1), BigInt::from(4))
        );
    }

    #[test]
    fn fair_coin_has_no_limit() {
        assert_eq!(
            stationary_pmf(DesignParams::fair()),
            Err(Error::NoStationaryDistribution)
        );
        assert!(asymptotic_var(DesignParams::fair(), Parity::Even).is_err());
        assert!(steady_state_threshold(0, DesignParams::fair(), 0.1, 10).is_err());
    }

    #[test]
    fn stationary_sums_to_one() {
        for p in [0.55, 0.6, 0.7, 0.9, 0.99, 1.0] {
            let s = stationary_pmf(DesignParams::new(p).unwrap()).unwrap();
            let total: f64 = (0..4000).map(|j| s.pi(j)).sum();
            assert!((total - 1.0).abs() < 1e-10, "p={p} total={total}");
        }
    }

    #[test]
    fn asymptotic_variance_values() {
        let v = asymptotic_var(DesignParams::new(0.9).unwrap(), Parity::Even).unwrap();
        assert!((v - 0.46).abs() <= 0.005);
        let v = asymptotic_var(DesignParams::new(0.6).unwrap(), Parity::Odd).unwrap();
        assert!((v - 12.52).abs() <= 0.005);
        let one = DesignParams::new(1.0).unwrap();
        assert_eq!(asymptotic_var(one, Parity::Even).unwrap(), 0.0);
        assert_eq!(asymptotic_var(one, Parity::Odd).unwrap(), 1.0);
        let near = asymptotic_var(DesignParams::new(0.999).unwrap(), Parity::Even).unwrap();
        assert!(near < 1e-2);
        // r = 7/3: 4r(r^2 + 1)/(r^2 - 1)^2 = 609/200
        let exact =
            asymptotic_var_exact(DesignParams::from_ratio(7, 10).unwrap(), Parity::Even).unwrap();
        assert_eq!(
            exact,
            BigRational::new(BigInt::from(609), BigInt::from(200))
        );
    }

    #[test]
    fn table_thresholds() {
        let p8 = DesignParams::new(0.8).unwrap();
        assert_eq!(
            steady_state_threshold(0, p8, 0.01, 500).unwrap(),
            Threshold::At(8)
        );
        let p7 = DesignParams::new(0.7).unwrap();
        assert_eq!(
            steady_state_threshold(25, p7, 0.10, 500).unwrap(),
            Threshold::At(85)
        );
        let p6 = DesignParams::new(0.6).unwrap();
        let t = steady_state_threshold(50, p6, 0.001, 500).unwrap();
        assert_eq!(t, Threshold::Exceeds(500));
        assert_eq!(std::format!("{t}"), ">500");
    }

    #[test]
    fn exact_thresholds_agree_with_float() {
        let tols = [0.1, 0.05, 0.01, 0.001];
        let exact_tols: Vec<BigRational> = [(1, 10), (1, 20), (1, 100), (1, 1000)]
            .iter()
            .map(|&(a, b)| BigRational::new(BigInt::from(a), BigInt::from(b)))
            .collect();
        for (num, den) in [(7, 10), (4, 5), (9, 10)] {
            let params = DesignParams::from_ratio(num, den).unwrap();
            for k in [0, 1, 2, 25] {
                let float = steady_state_thresholds(k, params, &tols, 120).unwrap();
                let exact = steady_state_thresholds_exact(k, params, &exact_tols, 120).unwrap();
                assert_eq!(float, exact, "k={k} p={params}");
            }
        }
        let params = DesignParams::from_ratio(3, 5).unwrap();
        assert!(steady_state_thresholds_exact(0, params, &exact_tols, 300).is_err());
    }

    #[test]
    fn threshold_argument_checks() {
        let p = DesignParams::new(0.8).unwrap();
        assert!(steady_state_threshold(0, p, 0.0, 10).is_err());
        assert!(steady_state_threshold(20, p, 0.1, 10).is_err());
    }

    #[test]
    fn deterministic_coin_thresholds() {
        let p = DesignParams::new(1.0).unwrap();
        assert_eq!(
            steady_state_threshold(0, p, 0.001, 50).unwrap(),
            Threshold::At(2)
        );
        assert_eq!(
            steady_state_threshold(1, p, 0.001, 50).unwrap(),
            Threshold::At(1)
        );
        assert_eq!(
            steady_state_threshold(2, p, 0.1, 50).unwrap(),
            Threshold::Exceeds(50)
        );
    }
}
