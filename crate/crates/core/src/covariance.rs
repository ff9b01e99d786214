//! First visits to balance, conditional and joint assignment probabilities,
//! and the covariance matrix of the treatment assignments.

use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{Arith, Exact, NumericMode, StableFloat, TermFactors};
use crate::params::DesignParams;
use crate::pmf::masses_with;

/// `t_k = P(T_{n+1} = 1 | D_n = k)`: 1/2 at balance, `q` above, `p` below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRule {
    params: DesignParams,
}

impl TransitionRule {
    pub fn new(params: DesignParams) -> Self {
        Self { params }
    }

    pub fn prob_a(&self, k: i64) -> f64 {
        match k.signum() {
            0 => 0.5,
            1 => self.params.q(),
            _ => self.params.p(),
        }
    }
}

/// Factors of `f_{k,0}^{(l)} = |k|/l * C(l, (l + |k|)/2) p^((l+|k|)/2) q^((l-|k|)/2)`
/// for `k != 0`, `l >= |k|` and `l - |k|` even.
fn first_visit_term(k: i64, l: u64) -> Option<TermFactors> {
    let a = k.unsigned_abs();
    if a == 0 || l < a || !(l - a).is_multiple_of(2) {
        return None;
    }
    let down = (l + a) / 2;
    let up = (l - a) / 2;
    Some(
        TermFactors::new(down as u32, up as u32)
            .ratio(a, l)
            .binomial(down, up),
    )
}

fn first_visit_with<A: Arith>(arith: &A, k: i64, l: u64) -> A::Value {
    if k == 0 {
        return if l == 0 {
            A::Value::one()
        } else {
            A::Value::zero()
        };
    }
    first_visit_term(k, l).map_or_else(A::Value::zero, |t| arith.term(&t))
}

/// Probability that the imbalance walk started at `k` first reaches zero in
/// exactly `l` steps.
pub fn first_visit(k: i64, l: u64, params: DesignParams) -> f64 {
    first_visit_with(&StableFloat::for_size(params, l as usize), k, l)
}

/// Memoized `f_{k,0}^{(l)}` and cumulative `f^_{k,0}^{(u)}` for
/// `|k| <= k_max`, `l, u <= horizon`.
#[derive(Debug, Clone)]
pub struct FirstVisitTable<V> {
    k_max: usize,
    horizon: usize,
    visit: Vec<V>,
    cumulative: Vec<V>,
}

impl<V: Clone + Zero + One> FirstVisitTable<V> {
    pub fn build<A: Arith<Value = V>>(arith: &A, k_max: usize, horizon: usize) -> Self {
        let width = horizon + 1;
        let mut visit = Vec::with_capacity((k_max + 1) * width);
        let mut cumulative = Vec::with_capacity((k_max + 1) * width);
        for k in 0..=k_max {
            let mut acc = V::zero();
            for l in 0..=horizon {
                let f = first_visit_with(arith, k as i64, l as u64);
                acc = acc + f.clone();
                visit.push(f);
                cumulative.push(if k == 0 { V::one() } else { acc.clone() });
            }
        }
        Self {
            k_max,
            horizon,
            visit,
            cumulative,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn slot(&self, k: i64, l: usize) -> usize {
        let a = k.unsigned_abs() as usize;
        assert!(
            a <= self.k_max && l <= self.horizon,
            "first-visit table queried outside its range"
        );
        a * (self.horizon + 1) + l
    }

    /// `f_{k,0}^{(l)}`.
    pub fn f(&self, k: i64, l: usize) -> V {
        self.visit[self.slot(k, l)].clone()
    }

    /// `f^_{k,0}^{(u)} = sum_{l=|k|}^{u} f_{k,0}^{(l)}`, and one for `k = 0`.
    pub fn f_hat(&self, k: i64, u: usize) -> V {
        self.cumulative[self.slot(k, u)].clone()
    }
}

pub fn first_visit_table(
    params: DesignParams,
    k_max: usize,
    horizon: usize,
) -> FirstVisitTable<f64> {
    FirstVisitTable::build(
        &StableFloat::for_size(params, horizon.max(k_max)),
        k_max,
        horizon,
    )
}

fn cond_value<A: Arith>(arith: &A, fhat: A::Value, k: i64) -> A::Value {
    let t = arith.transition(k);
    (arith.half() - t.clone()) * fhat + t
}

/// `P(T_m = 1 | D_n = k) = (1/2 - t_k) f^_{k,0}^{(m-n-1)} + t_k`.
///
/// Conditioning on an impossible event (`|k| > n`, parity mismatch or
/// `m <= n`) yields zero.
pub fn cond_assignment(m: u64, n: u64, k: i64, params: DesignParams) -> f64 {
    if n == 0 || m <= n || k.unsigned_abs() > n || (n as i64 - k) % 2 != 0 {
        return 0.0;
    }
    let horizon = (m - n - 1) as usize;
    let arith = StableFloat::for_size(params, horizon.max(1));
    let fhat: f64 = if k == 0 {
        1.0
    } else {
        (k.unsigned_abs()..=horizon as u64)
            .map(|l| first_visit_with(&arith, k, l))
            .sum()
    };
    cond_value(&arith, fhat, k)
}

/// `P(T_n = 1, T_m = 1)` given the distribution of `D_{n-1}` (indexed by
/// `(k + n - 1) / 2`) and a first-visit table covering `|k| <= n` and
/// horizon `m - n - 1`.
pub fn joint_assignment_with<A: Arith>(
    arith: &A,
    n: usize,
    m: usize,
    prev_masses: &[A::Value],
    table: &FirstVisitTable<A::Value>,
) -> A::Value {
    debug_assert!(1 <= n && n < m && prev_masses.len() == n);
    let u = m - n - 1;
    let prev = n as i64 - 1;
    let mut acc = A::Value::zero();
    for (i, d) in prev_masses.iter().enumerate() {
        let k = 2 * i as i64 - prev;
        let cond = cond_value(arith, table.f_hat(k + 1, u), k + 1);
        acc = acc + cond * d.clone() * arith.transition(k);
    }
    acc
}

/// Joint probability that patients `n < m` both receive treatment A.
pub fn joint_assignment(n: usize, m: usize, params: DesignParams) -> Result<f64> {
    if n == 0 || m <= n {
        return Err(Error::InvalidArgument("joint assignment needs 1 <= n < m"));
    }
    let arith = StableFloat::for_size(params, m);
    let table = FirstVisitTable::build(&arith, n, m - n - 1);
    let prev = masses_with(&arith, n - 1);
    Ok(joint_assignment_with(&arith, n, m, &prev, &table))
}

/// Row-major `n x n` covariance matrix, entry `(i, j)` for patients
/// `i + 1, j + 1`.
pub fn sigma_entries_with<A: Arith>(arith: &A, n: usize) -> Vec<A::Value> {
    let one = A::Value::one();
    let four = arith.constant(4, 1);
    let mut out = alloc::vec![A::Value::zero(); n * n];
    let table = FirstVisitTable::build(arith, n, n.saturating_sub(2));
    for i in 1..=n {
        out[(i - 1) * n + (i - 1)] = one.clone();
        let prev = masses_with(arith, i - 1);
        for j in i + 1..=n {
            let v = four.clone() * joint_assignment_with(arith, i, j, &prev, &table) - one.clone();
            out[(i - 1) * n + (j - 1)] = v.clone();
            out[(j - 1) * n + (i - 1)] = v;
        }
    }
    out
}

/// Covariance matrix of `(T_1, ..., T_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentCovariance {
    n: usize,
    params: DesignParams,
    entries: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl AssignmentCovariance {
    /// Wraps an arbitrary row-major symmetric matrix.
    pub fn from_entries(n: usize, params: DesignParams, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(Self {
            n,
            params,
            entries,
            exact: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// Zero-based entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn exact_get(&self, i: usize, j: usize) -> Option<&BigRational> {
        self.exact.as_ref().map(|e| &e[i * self.n + j])
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Leading `m x m` block, which is the covariance matrix for `m` patients.
    pub fn leading(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let pick = |i: usize| (0..m).map(move |j| i * self.n + j);
        Self {
            n: m,
            params: self.params,
            entries: (0..m).flat_map(pick).map(|x| self.entries[x]).collect(),
            exact: self
                .exact
                .as_ref()
                .map(|e| (0..m).flat_map(pick).map(|x| e[x].clone()).collect()),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `v' Sigma v`.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        Ok(self.mul_vec(v)?.iter().zip(v).map(|(a, b)| a * b).sum())
    }
}

/// Exact covariance matrix of the first `n` assignments.
pub fn sigma(n: usize, params: DesignParams, mode: NumericMode) -> Result<AssignmentCovariance> {
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    match mode {
        NumericMode::ExactRational => {
            let arith = Exact::for_size(params, n)?;
            let exact = sigma_entries_with(&arith, n);
            let entries = exact
                .iter()
                .map(|v| v.to_f64().unwrap_or(f64::NAN))
                .collect();
            Ok(AssignmentCovariance {
                n,
                params,
                entries,
                exact: Some(exact),
            })
        }
        NumericMode::Float64Stable { .. } => {
            let arith = StableFloat::new(params, mode.guards(n)?);
            let entries = sigma_entries_with(&arith, n);
            Ok(AssignmentCovariance {
                n,
                params,
                entries,
                exact: None,
            })
        }
    }
}

/// `(sqrt(2)/2, -sqrt(2)/2, 0, ..., 0)`.
pub fn two_p_eigenvector(n: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; n];
    let h = core::f64::consts::FRAC_1_SQRT_2;
    if n >= 2 {
        v[0] = h;
        v[1] = -h;
    }
    v
}

/// `|Sigma v - 2p v|` for the contrast of the first two patients.
pub fn verify_2p_eigenpair(n: usize, params: DesignParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::SizeTooSmall { n, min: 2 });
    }
    let cov = sigma(n, params, NumericMode::stable())?;
    Ok(eigenpair_residual(&cov))
}

pub fn eigenpair_residual(cov: &AssignmentCovariance) -> f64 {
    let v = two_p_eigenvector(cov.n());
    let two_p = 2.0 * cov.params().p();
    let sv = cov.mul_vec(&v).expect("dimension matches by construction");
    libm::sqrt(
        sv.iter()
            .zip(&v)
            .map(|(a, b)| (a - two_p * b) * (a - two_p * b))
            .sum(),
    )
}
