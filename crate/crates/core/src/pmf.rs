//! Distribution of the imbalance `D_n`.

use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{Arith, Exact, NumericMode, StableFloat, TermFactors};
use crate::params::DesignParams;

/// Probability mass function of `D_n` over `{-n, -n + 2, ..., n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalancePmf {
    n: usize,
    params: DesignParams,
    mass: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl ImbalancePmf {
    fn from_float(n: usize, params: DesignParams, mass: Vec<f64>) -> Self {
        Self {
            n,
            params,
            mass,
            exact: None,
        }
    }

    fn from_exact(n: usize, params: DesignParams, exact: Vec<BigRational>) -> Self {
        let mass = exact
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect();
        Self {
            n,
            params,
            mass,
            exact: Some(exact),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    fn index(&self, k: i64) -> Option<usize> {
        let n = self.n as i64;
        if k.abs() > n || (n - k) % 2 != 0 {
            None
        } else {
            Some(((k + n) / 2) as usize)
        }
    }

    /// `P(D_n = k)`; zero off the support.
    pub fn mass(&self, k: i64) -> f64 {
        self.index(k).map_or(0.0, |i| self.mass[i])
    }

    /// `P(|D_n| = k)`.
    pub fn abs_mass(&self, k: u64) -> f64 {
        let k = k as i64;
        if k == 0 {
            self.mass(0)
        } else {
            self.mass(k) + self.mass(-k)
        }
    }

    /// Exact mass when built in rational mode.
    pub fn exact_mass(&self, k: i64) -> Option<BigRational> {
        let exact = self.exact.as_ref()?;
        Some(
            self.index(k)
                .map_or_else(BigRational::zero, |i| exact[i].clone()),
        )
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `(k, P(D_n = k))` over the support in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.n as i64;
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &m)| (2 * i as i64 - n, m))
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn exact_total(&self) -> Option<BigRational> {
        self.exact
            .as_ref()
            .map(|e| e.iter().fold(BigRational::zero(), |a, b| a + b))
    }

    /// `E[D_n^2]`, which is the variance since the mean is zero.
    pub fn second_moment(&self) -> f64 {
        self.iter().map(|(k, m)| (k * k) as f64 * m).sum()
    }
}

/// Terms of `P(D_n = k)` for `k >= 0` of the same parity as `n`.
fn mass_terms(n: u64, k: u64) -> impl Iterator<Item = TermFactors> {
    let half_sum = (n + k) / 2;
    let half_diff = (n - k) / 2;
    // k = 0 sums l < n/2, k > 0 sums l <= (n - k)/2
    let upper = if k == 0 { half_diff } else { half_diff + 1 };
    (0..upper).map(move |l| {
        let t = if k == 0 {
            TermFactors::new(half_diff as u32, l as u32)
        } else {
            TermFactors::new(half_diff as u32, (k + l - 1) as u32).ratio(1, 2)
        };
        t.ratio(n + k - 2 * l, n + k + 2 * l).binomial(half_sum, l)
    })
}

/// Generic term of `P(D_n = k)`, exposed for checking the factor counts.
pub fn mass_term_factors(n: u64, k: u64, l: u64) -> Option<TermFactors> {
    if k > n || !(n - k).is_multiple_of(2) {
        return None;
    }
    mass_terms(n, k).nth(l as usize)
}

/// `P(D_n = k)` from the closed form; zero off the support.
pub fn mass_with<A: Arith>(arith: &A, n: usize, k: i64) -> A::Value {
    let (n, k) = (n as u64, k.unsigned_abs());
    if k > n || (n - k) % 2 != 0 {
        return A::Value::zero();
    }
    if n == 0 {
        return A::Value::one();
    }
    arith.sum_terms(mass_terms(n, k))
}

/// `P(D_n = i*2 - n)` for `i = 0..=n`, mirrored from `k >= 0`.
pub fn masses_with<A: Arith>(arith: &A, n: usize) -> Vec<A::Value> {
    let mut out = alloc::vec![A::Value::zero(); n + 1];
    for i in n.div_ceil(2)..=n {
        let k = 2 * i as i64 - n as i64;
        let v = mass_with(arith, n, k);
        out[n - i] = v.clone();
        out[i] = v;
    }
    out
}

/// Forward recurrences on `k >= 0`, started from `P(D_1 = +-1) = 1/2`.
pub fn dp_masses_with<A: Arith>(arith: &A, n: usize) -> Vec<A::Value> {
    let (p, q, half) = (arith.p(), arith.q(), arith.half());
    let two_p = p.clone() + p.clone();
    // nonneg[k] = P(D_m = k)
    let mut nonneg: Vec<A::Value> = alloc::vec![A::Value::zero(), half.clone()];
    for m in 1..n {
        let mut next = alloc::vec![A::Value::zero(); m + 2];
        let at = |k: usize| nonneg.get(k).cloned().unwrap_or_else(A::Value::zero);
        next[0] = two_p.clone() * at(1);
        next[1] = half.clone() * at(0) + p.clone() * at(2);
        for k in 2..=m {
            next[k] = q.clone() * at(k - 1) + p.clone() * at(k + 1);
        }
        next[m + 1] = q.clone() * at(m);
        nonneg = next;
    }
    let mut out = alloc::vec![A::Value::zero(); n + 1];
    for i in 0..=n {
        let k = (2 * i as i64 - n as i64).unsigned_abs() as usize;
        out[i] = nonneg[k].clone();
    }
    out
}

/// `Var(D_n) = sum_{k >= 1, n - k even} k^2 P(|D_n| = k)` as a single sum
/// of closed-form terms.
pub fn var_with<A: Arith>(arith: &A, n: usize) -> A::Value {
    let n = n as u64;
    let terms = (1..=n)
        .filter(move |k| (n - k).is_multiple_of(2))
        .flat_map(move |k| {
            let half_sum = (n + k) / 2;
            let half_diff = (n - k) / 2;
            (0..=half_diff).map(move |l| {
                let mut t = TermFactors::new(half_diff as u32, (k + l - 1) as u32)
                    .ratio(n + k - 2 * l, n + k + 2 * l)
                    .binomial(half_sum, l);
                t.integers.extend([k, k]);
                t
            })
        });
    arith.sum_terms(terms)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::SizeTooSmall { n, min: 1 })
    } else {
        Ok(())
    }
}

/// Exact distribution of `D_n` from the closed form.
pub fn pmf_dn(n: usize, params: DesignParams, mode: NumericMode) -> Result<ImbalancePmf> {
    check_n(n)?;
    match mode {
        NumericMode::ExactRational => {
            let exact = Exact::for_size(params, n)?;
            Ok(ImbalancePmf::from_exact(n, params, masses_with(&exact, n)))
        }
        NumericMode::Float64Stable { .. } => {
            let float = StableFloat::new(params, mode.guards(n)?);
            Ok(ImbalancePmf::from_float(n, params, masses_with(&float, n)))
        }
    }
}

/// Distribution of `D_n` by iterating the one-step recurrences (oracle).
pub fn dp_pmf_dn(n: usize, params: DesignParams) -> Result<ImbalancePmf> {
    check_n(n)?;
    let float = StableFloat::for_size(params, n);
    Ok(ImbalancePmf::from_float(
        n,
        params,
        dp_masses_with(&float, n),
    ))
}

/// Rational-arithmetic version of [`dp_pmf_dn`].
pub fn dp_pmf_dn_exact(n: usize, params: DesignParams) -> Result<ImbalancePmf> {
    check_n(n)?;
    let exact = Exact::for_size(params, n)?;
    Ok(ImbalancePmf::from_exact(
        n,
        params,
        dp_masses_with(&exact, n),
    ))
}

/// Single mass `P(D_n = k)`; zero when `|k| > n` or the parity differs.
pub fn prob_dn(n: usize, k: i64, params: DesignParams, mode: NumericMode) -> Result<f64> {
    match mode {
        NumericMode::ExactRational => {
            let exact = Exact::for_size(params, n)?;
            Ok(exact.to_f64(&mass_with(&exact, n, k)))
        }
        NumericMode::Float64Stable { .. } => Ok(mass_with(
            &StableFloat::new(params, mode.guards(n.max(1))?),
            n,
            k,
        )),
    }
}

pub fn var_dn(n: usize, params: DesignParams) -> Result<f64> {
    check_n(n)?;
    Ok(var_with(&StableFloat::for_size(params, n), n))
}

pub fn var_dn_exact(n: usize, params: DesignParams) -> Result<BigRational> {
    check_n(n)?;
    Ok(var_with(&Exact::for_size(params, n)?, n))
}
