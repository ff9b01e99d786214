//! Selection bias and accidental bias.

use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::One;

use crate::covariance::AssignmentCovariance;
use crate::error::{Error, Result};
use crate::numeric::{Arith, Exact, NumericMode, StableFloat, TermFactors};
use crate::params::DesignParams;
use crate::pmf::prob_dn;

/// Probability that the "guess the arm seen least often" strategy is right
/// at step `j`: `P(D_{j-1} = 0)/2 + p P(|D_{j-1}| > 0)`.
pub fn selection_bias_step(j: usize, params: DesignParams) -> Result<f64> {
    if j == 0 {
        return Err(Error::SizeTooSmall { n: j, min: 1 });
    }
    let balanced = prob_dn(j - 1, 0, params, NumericMode::stable())?;
    Ok(0.5 * balanced + params.p() * (1.0 - balanced))
}

/// `p^m sum_{l<m} (m - l)/(m + l) C(m + l, l) q^l`, which is `P(D_2m = 0)`.
fn balance_terms(m: u64) -> impl Iterator<Item = TermFactors> {
    (0..m).map(move |l| {
        TermFactors::new(m as u32, l as u32)
            .ratio(m - l, m + l)
            .binomial(m, l)
    })
}

/// Per-step guessing probability from its own closed form: `1/2` at the first
/// step, `p` at even steps and `p - (p - 1/2) P(D_2m = 0)` at step `2m + 1`.
pub fn selection_bias_step_closed_form(j: usize, params: DesignParams) -> Result<f64> {
    match j {
        0 => Err(Error::SizeTooSmall { n: j, min: 1 }),
        1 => Ok(0.5),
        j if j % 2 == 0 => Ok(params.p()),
        j => {
            let m = (j as u64 - 1) / 2;
            let arith = StableFloat::for_size(params, j);
            let p = params.p();
            Ok(p - (p - 0.5) * arith.sum_terms(balance_terms(m)))
        }
    }
}

fn total_with<A: Arith>(arith: &A, n: usize) -> A::Value {
    let p = arith.p();
    let half = arith.half();
    let inner = arith.sum_terms((1..=(n as u64 - 1) / 2).flat_map(balance_terms));
    half.clone() + arith.constant(n as i64 - 1, 1) * p.clone() - (p - half) * inner
}

/// Expected number of correct guesses in `n` trials, from the closed form.
pub fn total_selection_bias(n: usize, params: DesignParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    Ok(total_with(&StableFloat::for_size(params, n), n))
}

pub fn total_selection_bias_exact(n: usize, params: DesignParams) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    Ok(total_with(&Exact::for_size(params, n)?, n))
}

/// `(total - n/2) / n` in exact arithmetic.
pub fn average_excess_exact(n: usize, params: DesignParams) -> Result<BigRational> {
    let total = total_selection_bias_exact(n, params)?;
    let n_big = BigRational::from_integer(n.into());
    Ok((total - n_big.clone() / BigRational::from_integer(2.into())) / n_big)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionBiasReport {
    pub n: usize,
    pub params: DesignParams,
    /// Guessing probability at steps `1..=n`.
    pub per_step: Vec<f64>,
    /// Closed-form total.
    pub total: f64,
    pub excess: f64,
    pub average_excess: f64,
}

impl SelectionBiasReport {
    pub fn per_step_total(&self) -> f64 {
        self.per_step.iter().sum()
    }
}

pub fn selection_bias_report(n: usize, params: DesignParams) -> Result<SelectionBiasReport> {
    let per_step = (1..=n)
        .map(|j| selection_bias_step(j, params))
        .collect::<Result<Vec<_>>>()?;
    let total = total_selection_bias(n, params)?;
    let excess = total - n as f64 / 2.0;
    Ok(SelectionBiasReport {
        n,
        params,
        per_step,
        total,
        excess,
        average_excess: excess / n as f64,
    })
}

/// `(r - 1) / 4r`, with the limit `1/4` at `p = 1`.
pub fn asymptotic_excess(params: DesignParams) -> f64 {
    if params.is_deterministic() {
        return 0.25;
    }
    let r = params.r();
    (r - 1.0) / (4.0 * r)
}

pub fn asymptotic_excess_exact(params: DesignParams) -> Result<BigRational> {
    let quarter = BigRational::new(1.into(), 4.into());
    if params.is_deterministic() {
        return Ok(quarter);
    }
    let r = params.p_exact()? / params.q_exact()?;
    Ok((r.clone() - BigRational::one()) / r * quarter)
}

/// `z' Sigma z` for a unit-norm covariate vector `z`.
pub fn accidental_bias(z: &[f64], cov: &AssignmentCovariance) -> Result<f64> {
    if z.len() != cov.n() {
        return Err(Error::DimensionMismatch {
            expected: cov.n(),
            got: z.len(),
        });
    }
    let norm = libm::sqrt(z.iter().map(|x| x * x).sum());
    if !(libm::fabs(norm - 1.0) <= 1e-10) {
        return Err(Error::NotUnitVector(norm));
    }
    cov.quadratic_form(z)
}
