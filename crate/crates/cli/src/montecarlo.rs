//! Parallel Monte Carlo over fixed blocks of replicates.
//!
//! Replicate `i` always draws from stream `i + 1` of the seed and blocks are
//! merged in index order, so results do not depend on the thread count.

use std::ops::Range;

use bcd_core::simulate::{
    fill_assignments, mc_moments, replicate_rng, McEstimate, Moments, MIN_REPLICATES,
};
use bcd_core::DesignParams;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

const BLOCK: u64 = 8192;

fn blocks(replicates: u64) -> Vec<Range<u64>> {
    (0..replicates)
        .step_by(BLOCK as usize)
        .map(|s| s..(s + BLOCK).min(replicates))
        .collect()
}

fn check(n: usize, replicates: u64) -> CliResult<()> {
    if replicates < MIN_REPLICATES {
        return Err(CliError::usage(format!(
            "--reps must be at least {MIN_REPLICATES}"
        )));
    }
    if n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    Ok(())
}

pub fn par_moments<F>(
    n: usize,
    params: DesignParams,
    statistic: &F,
    replicates: u64,
    seed: u64,
) -> Moments
where
    F: Fn(&[i8], &mut ChaCha8Rng) -> f64 + Sync,
{
    blocks(replicates)
        .into_par_iter()
        .map(|r| mc_moments(n, params, statistic, seed, r))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge)
}

pub fn par_estimate<F>(
    n: usize,
    params: DesignParams,
    statistic: &F,
    replicates: u64,
    seed: u64,
) -> CliResult<McEstimate>
where
    F: Fn(&[i8], &mut ChaCha8Rng) -> f64 + Sync,
{
    check(n, replicates)?;
    Ok(par_moments(n, params, statistic, replicates, seed).estimate())
}

/// Simulated null behaviour of `W = a'T` under the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTestSimulation {
    /// Estimate of `E[W^2] = Var(W)`.
    pub second_moment: McEstimate,
    /// Share of replicates with `|W| >= |observed|`, counting the observed
    /// sequence itself: `(1 + count) / (1 + replicates)`.
    pub p_value: f64,
}

impl RankTestSimulation {
    pub fn sd(&self) -> f64 {
        self.second_moment.point.sqrt()
    }

    /// Delta-method standard error of [`RankTestSimulation::sd`].
    pub fn sd_std_error(&self) -> f64 {
        let sd = self.sd();
        if sd == 0.0 {
            0.0
        } else {
            self.second_moment.std_error / (2.0 * sd)
        }
    }
}

pub fn simulate_rank_test(
    scores: &[f64],
    params: DesignParams,
    observed: f64,
    replicates: u64,
    seed: u64,
) -> CliResult<RankTestSimulation> {
    let n = scores.len();
    check(n, replicates)?;
    let cut = observed.abs() * (1.0 - 1e-12);
    let parts: Vec<(Moments, u64)> = blocks(replicates)
        .into_par_iter()
        .map(|range| {
            let mut moments = Moments::default();
            let mut extreme = 0u64;
            let mut path = Vec::with_capacity(n);
            for i in range {
                let mut rng = replicate_rng(seed, i + 1);
                fill_assignments(n, &params, &mut rng, &mut path);
                let w: f64 = path.iter().zip(scores).map(|(&t, a)| t as f64 * a).sum();
                moments.push(w * w);
                if w.abs() >= cut {
                    extreme += 1;
                }
            }
            (moments, extreme)
        })
        .collect();
    let (moments, extreme) = parts
        .into_iter()
        .fold((Moments::default(), 0), |(m, e), (bm, be)| {
            (m.merge(bm), e + be)
        });
    Ok(RankTestSimulation {
        second_moment: moments.estimate(),
        p_value: (1 + extreme) as f64 / (1 + replicates) as f64,
    })
}
