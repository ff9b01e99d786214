//! Sequence generation, exhaustive enumeration, Monte Carlo estimation and
//! linear rank statistics.

use alloc::vec::Vec;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bias::selection_bias_step;
use crate::covariance::{joint_assignment, AssignmentCovariance};
use crate::error::{Error, Result};
use crate::numeric::NumericMode;
use crate::params::DesignParams;
use crate::pmf::{prob_dn, var_dn};

/// Largest `n` for exhaustive enumeration of the `2^n` paths.
pub const MAX_ENUMERATION_N: usize = 16;

/// Realized assignments (`+1` for A, `-1` for B) with running imbalance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentSequence {
    assignments: Vec<i8>,
    imbalance_path: Vec<i64>,
    seed: u64,
}

impl TreatmentSequence {
    pub fn from_assignments(assignments: Vec<i8>, seed: u64) -> Result<Self> {
        if assignments.iter().any(|&t| t != 1 && t != -1) {
            return Err(Error::InvalidArgument("assignments must be +1 or -1"));
        }
        let imbalance_path = assignments
            .iter()
            .scan(0i64, |d, &t| {
                *d += t as i64;
                Some(*d)
            })
            .collect();
        Ok(Self {
            assignments,
            imbalance_path,
            seed,
        })
    }

    pub fn assignments(&self) -> &[i8] {
        &self.assignments
    }

    /// `D_1, ..., D_n`.
    pub fn imbalance_path(&self) -> &[i64] {
        &self.imbalance_path
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn final_imbalance(&self) -> i64 {
        self.imbalance_path.last().copied().unwrap_or(0)
    }
}

/// Independent stream `index` of the generator for `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws `n` BCD(p) assignments into `out`.
pub fn fill_assignments<R: RngCore + ?Sized>(
    n: usize,
    params: &DesignParams,
    rng: &mut R,
    out: &mut Vec<i8>,
) {
    out.clear();
    let mut d = 0i64;
    for _ in 0..n {
        let prob_a = match d.signum() {
            0 => 0.5,
            1 => params.q(),
            _ => params.p(),
        };
        let t = if uniform(rng) < prob_a { 1 } else { -1 };
        d += t as i64;
        out.push(t);
    }
}

/// One BCD(p) sequence from stream 0 of `seed`.
pub fn generate_sequence(n: usize, params: DesignParams, seed: u64) -> Result<TreatmentSequence> {
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    let mut out = Vec::with_capacity(n);
    fill_assignments(n, &params, &mut replicate_rng(seed, 0), &mut out);
    TreatmentSequence::from_assignments(out, seed)
}

/// Visits all `2^n` assignment paths with their probabilities.
pub fn enumerate_paths<F: FnMut(&[i8], f64)>(
    n: usize,
    params: DesignParams,
    mut visit: F,
) -> Result<()> {
    if n > MAX_ENUMERATION_N {
        return Err(Error::EnumerationTooLarge {
            n,
            cap: MAX_ENUMERATION_N,
        });
    }
    let mut path = Vec::with_capacity(n);
    walk(n, &params, &mut path, 0, 1.0, &mut visit);
    Ok(())
}

fn walk<F: FnMut(&[i8], f64)>(
    n: usize,
    params: &DesignParams,
    path: &mut Vec<i8>,
    d: i64,
    w: f64,
    visit: &mut F,
) {
    if path.len() == n {
        visit(path, w);
        return;
    }
    let prob_a = match d.signum() {
        0 => 0.5,
        1 => params.q(),
        _ => params.p(),
    };
    for (t, pt) in [(1i8, prob_a), (-1i8, 1.0 - prob_a)] {
        if pt == 0.0 {
            continue;
        }
        path.push(t);
        walk(n, params, path, d + t as i64, w * pt, visit);
        path.pop();
    }
}

/// Exact expectation of a path functional by summing over all paths.
pub fn enumerate_exact<F: Fn(&[i8]) -> f64>(
    n: usize,
    params: DesignParams,
    statistic: F,
) -> Result<f64> {
    let mut acc = 0.0;
    enumerate_paths(n, params, |path, w| acc += w * statistic(path))?;
    Ok(acc)
}

/// Running mean and sum of squared deviations; merges associatively.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            point: self.mean,
            std_error: libm::sqrt(self.variance() / self.count.max(1) as f64),
            replicates: self.count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub point: f64,
    pub std_error: f64,
    pub replicates: u64,
}

impl McEstimate {
    /// `|point - value|` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.point == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            libm::fabs(self.point - value) / self.std_error
        }
    }
}

/// Minimum replicate count accepted by [`mc_estimate`].
pub const MIN_REPLICATES: u64 = 1000;

/// Accumulates `statistic` over replicates `indices` (stream `i + 1` of
/// `seed` for replicate `i`).
pub fn mc_moments<F>(
    n: usize,
    params: DesignParams,
    statistic: &F,
    seed: u64,
    indices: core::ops::Range<u64>,
) -> Moments
where
    F: Fn(&[i8], &mut ChaCha8Rng) -> f64 + ?Sized,
{
    let mut moments = Moments::default();
    let mut path = Vec::with_capacity(n);
    for i in indices {
        let mut rng = replicate_rng(seed, i + 1);
        fill_assignments(n, &params, &mut rng, &mut path);
        moments.push(statistic(&path, &mut rng));
    }
    moments
}

/// Monte Carlo mean and standard error of a path statistic.
pub fn mc_estimate<F>(
    n: usize,
    params: DesignParams,
    statistic: &F,
    replicates: u64,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[i8], &mut ChaCha8Rng) -> f64 + ?Sized,
{
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidArgument(
            "at least 1000 replicates are required",
        ));
    }
    if n == 0 {
        return Err(Error::SizeTooSmall { n, min: 1 });
    }
    Ok(mc_moments(n, params, statistic, seed, 0..replicates).estimate())
}

/// Guess the arm seen least often so far; at balance guess uniformly.
/// Returns 1 when the guess for step `j` (1-based) matches the assignment.
pub fn guess_is_correct<R: RngCore + ?Sized>(path: &[i8], j: usize, rng: &mut R) -> f64 {
    let d: i64 = path[..j - 1].iter().map(|&t| t as i64).sum();
    let guess = match d.signum() {
        0 => {
            if rng.next_u32() & 1 == 0 {
                1
            } else {
                -1
            }
        }
        s => -s as i8,
    };
    if guess == path[j - 1] {
        1.0
    } else {
        0.0
    }
}

/// Named path statistics with known exact expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `1{D_n = 0}`.
    Balance,
    /// `D_n^2`, whose mean is `Var(D_n)`.
    Variance,
    /// Correct-guess indicator at step `n`.
    SelectionBias,
    /// `T_i T_j` (1-based), whose mean is `sigma_ij`.
    Cov(usize, usize),
}

impl Statistic {
    /// Sequence length needed; at least `n`.
    pub fn min_len(&self) -> usize {
        match *self {
            Statistic::Cov(i, j) => i.max(j),
            _ => 1,
        }
    }

    pub fn eval<R: RngCore + ?Sized>(&self, path: &[i8], rng: &mut R) -> f64 {
        let n = path.len();
        match *self {
            Statistic::Balance => {
                let d: i64 = path.iter().map(|&t| t as i64).sum();
                if d == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Statistic::Variance => {
                let d: i64 = path.iter().map(|&t| t as i64).sum();
                (d * d) as f64
            }
            Statistic::SelectionBias => guess_is_correct(path, n, rng),
            Statistic::Cov(i, j) => (path[i - 1] * path[j - 1]) as f64,
        }
    }

    /// Exact expectation for sequences of length `n`.
    pub fn exact(&self, n: usize, params: DesignParams) -> Result<f64> {
        match *self {
            Statistic::Balance => prob_dn(n, 0, params, NumericMode::stable()),
            Statistic::Variance => var_dn(n, params),
            Statistic::SelectionBias => selection_bias_step(n, params),
            Statistic::Cov(i, j) => {
                if i == 0 || j == 0 || i.max(j) > n {
                    return Err(Error::InvalidArgument("cov indices must lie in 1..=n"));
                }
                if i == j {
                    return Ok(1.0);
                }
                Ok(4.0 * joint_assignment(i.min(j), i.max(j), params)? - 1.0)
            }
        }
    }
}

/// Accepts `balance`, `variance`, `selection-bias` and `cov(i,j)`.
impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "balance" => return Ok(Statistic::Balance),
            "variance" => return Ok(Statistic::Variance),
            "selection-bias" => return Ok(Statistic::SelectionBias),
            _ => {}
        }
        let inner = s
            .strip_prefix("cov(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(s.into()))?;
        let (i, j) = inner
            .split_once(',')
            .ok_or_else(|| Error::Parse(s.into()))?;
        let i: usize = i.trim().parse().map_err(|_| Error::Parse(s.into()))?;
        let j: usize = j.trim().parse().map_err(|_| Error::Parse(s.into()))?;
        if i == 0 || j == 0 {
            return Err(Error::Parse(s.into()));
        }
        Ok(Statistic::Cov(i, j))
    }
}

/// Scores `a_n` of a linear rank statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    centered: bool,
}

impl ScoreVector {
    /// Scores as given.
    pub fn raw(scores: Vec<f64>) -> Self {
        Self {
            scores,
            centered: false,
        }
    }

    /// Scores with their mean subtracted.
    pub fn centered(mut scores: Vec<f64>) -> Self {
        if !scores.is_empty() {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            scores.iter_mut().for_each(|s| *s -= mean);
        }
        Self {
            scores,
            centered: true,
        }
    }

    /// Centered ranks of `values`; ties get their average rank.
    pub fn centered_ranks(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut ranks = alloc::vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && values[order[j + 1]] == values[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        Self::centered(ranks)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// `W_n = a' T`.
pub fn rank_statistic(seq: &TreatmentSequence, scores: &ScoreVector) -> Result<f64> {
    rank_statistic_raw(seq.assignments(), scores)
}

pub fn rank_statistic_raw(assignments: &[i8], scores: &ScoreVector) -> Result<f64> {
    if assignments.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: assignments.len(),
        });
    }
    Ok(assignments
        .iter()
        .zip(scores.scores())
        .map(|(&t, a)| t as f64 * a)
        .sum())
}

/// `Var(W_n) = a' Sigma a`.
pub fn rank_statistic_variance(scores: &ScoreVector, cov: &AssignmentCovariance) -> Result<f64> {
    if scores.len() != cov.n() {
        return Err(Error::DimensionMismatch {
            expected: cov.n(),
            got: scores.len(),
        });
    }
    cov.quadratic_form(scores.scores())
}
