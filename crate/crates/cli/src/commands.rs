//! One function per subcommand, each producing an [`OutputRecord`].

use bcd_core::bias::{
    accidental_bias, asymptotic_excess, asymptotic_excess_exact, selection_bias_step,
    total_selection_bias, total_selection_bias_exact,
};
use bcd_core::covariance::{eigenpair_residual, sigma};
use bcd_core::eigen::{eigen_spectrum, DEFAULT_TOL};
use bcd_core::numeric::{Arith, Exact};
use bcd_core::pmf::{mass_with, pmf_dn, var_dn, var_dn_exact};
use bcd_core::simulate::{
    generate_sequence, rank_statistic, rank_statistic_variance, ScoreVector, Statistic,
    TreatmentSequence,
};
use bcd_core::stationary::{
    asymptotic_var, asymptotic_var_exact, stationary_pmf, Parity, Threshold,
};
use bcd_core::{DesignParams, NumericMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand_chacha::ChaCha8Rng;

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::input::{read_assignments, read_scores};
use crate::montecarlo::{par_estimate, simulate_rank_test};
use crate::record::{Cell, Mode, OutputRecord, Row};
use crate::tables::{
    self, exact_string, exact_to_f64, excess_grid, excess_layout, threshold_grid, variance_grid,
    variance_layout, EXCESS_DECIMALS, VARIANCE_DECIMALS,
};

fn numeric(mode: Mode) -> NumericMode {
    match mode {
        Mode::Float => NumericMode::stable(),
        Mode::Rational => NumericMode::ExactRational,
    }
}

fn exact_cell(x: &BigRational) -> Row {
    Row::new::<&str, &str>(&[], exact_to_f64(x)).with_exact(Some(exact_string(x)))
}

/// Row whose value comes from `exact` in rational mode and `float` otherwise.
fn valued(
    key: &[(&str, String)],
    mode: Mode,
    float: impl FnOnce() -> CliResult<f64>,
    exact: impl FnOnce() -> CliResult<BigRational>,
) -> CliResult<Row> {
    let row = match mode {
        Mode::Float => Row::new::<&str, &str>(&[], float()?),
        Mode::Rational => exact_cell(&exact()?),
    };
    Ok(Row {
        key: key
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        ..row
    })
}

fn quantity(name: &str, index: impl ToString) -> [(&'static str, String); 2] {
    [("quantity", name.to_string()), ("index", index.to_string())]
}

pub fn run(command: &Command, mode: Mode) -> CliResult<OutputRecord> {
    match command {
        Command::Pmf(a) => pmf(a, mode),
        Command::Var(a) => var(a, mode),
        Command::Stationary(a) => stationary(a, mode),
        Command::Threshold(a) => threshold(a, mode),
        Command::Table2(a) => table2(a, mode),
        Command::Table3(a) => table3(a, mode),
        Command::Sigma(a) => sigma_cmd(a, mode),
        Command::Eigen(a) => eigen(a, mode),
        Command::SelectionBias(a) => selection_bias(a, mode),
        Command::AccidentalBias(a) => accidental(a, mode),
        Command::Ranktest(a) => ranktest(a, mode),
        Command::Simulate(a) => simulate(a, mode),
    }
}

pub fn pmf(a: &PmfArgs, mode: Mode) -> CliResult<OutputRecord> {
    let dist = pmf_dn(a.n, a.p, numeric(mode))?;
    let mut rec = OutputRecord::new("pmf", mode)
        .input("n", a.n)
        .input("p", a.p);
    let ks: Vec<i64> = match a.k {
        Some(k) => {
            rec = rec.input("k", k);
            vec![k]
        }
        None => dist.iter().map(|(k, _)| k).collect(),
    };
    for k in ks {
        rec.push(
            Row::new(&[("k", k)], dist.mass(k))
                .with_exact(dist.exact_mass(k).as_ref().map(exact_string)),
        );
    }
    Ok(rec)
}

pub fn var(a: &SizeArgs, mode: Mode) -> CliResult<OutputRecord> {
    let mut rec = OutputRecord::new("var", mode)
        .input("n", a.n)
        .input("p", a.p);
    rec.push(valued(
        &[("n", a.n.to_string())],
        mode,
        || Ok(var_dn(a.n, a.p)?),
        || Ok(var_dn_exact(a.n, a.p)?),
    )?);
    Ok(rec)
}

pub fn stationary(a: &StationaryArgs, mode: Mode) -> CliResult<OutputRecord> {
    let dist = stationary_pmf(a.p)?;
    let mut rec = OutputRecord::new("stationary", mode)
        .input("p", a.p)
        .input("k", a.k);
    for j in 0..=a.k {
        rec.push(valued(
            &quantity("pi", j),
            mode,
            || Ok(dist.pi(j)),
            || Ok(dist.pi_exact(j)?),
        )?);
    }
    for (name, parity) in [("even", Parity::Even), ("odd", Parity::Odd)] {
        rec.push(valued(
            &quantity("asymptotic-var", name),
            mode,
            || Ok(asymptotic_var(a.p, parity)?),
            || Ok(asymptotic_var_exact(a.p, parity)?),
        )?);
    }
    rec.push(valued(
        &quantity("asymptotic-excess", ""),
        mode,
        || Ok(asymptotic_excess(a.p)),
        || Ok(asymptotic_excess_exact(a.p)?),
    )?);
    Ok(rec)
}

pub fn threshold(a: &ThresholdArgs, mode: Mode) -> CliResult<OutputRecord> {
    if a.p.iter().any(DesignParams::is_fair) {
        return Err(CliError::usage("p = 1/2 has no steady state"));
    }
    let cells = threshold_grid(&a.k, &a.p, &a.tol, a.n_max, mode)?;
    let mut rec = OutputRecord::new("threshold", mode).input("n-max", a.n_max);
    for c in cells {
        let value = match c.threshold {
            Threshold::At(n) => Cell::Int(n as i64),
            t @ Threshold::Exceeds(_) => Cell::Text(t.to_string()),
        };
        rec.push(Row::new(
            &[
                ("k", c.k.to_string()),
                ("p", c.params.to_string()),
                ("tol", c.tol),
            ],
            value,
        ));
    }
    Ok(rec)
}

fn grid_record(
    command: &str,
    cells: Vec<tables::GridCell>,
    decimals: usize,
    parity: bool,
    mode: Mode,
) -> OutputRecord {
    let mut rec = OutputRecord::new(command, mode).input("decimals", decimals);
    for c in cells {
        let mut key = vec![("n", c.horizon.to_string())];
        if parity {
            key.push(("parity", c.horizon.parity_label().to_string()));
        }
        key.push(("p", c.params.to_string()));
        let exact = match mode {
            Mode::Rational => c.exact.as_ref().map(exact_string),
            Mode::Float => None,
        };
        rec.push(
            Row::new(&key, c.value)
                .with_rounded(c.rounded(decimals))
                .with_exact(exact),
        );
    }
    rec
}

fn grid_sizes(given: &[usize], default: &[usize]) -> CliResult<Vec<usize>> {
    if given.contains(&0) {
        return Err(CliError::usage("--n values must be at least 1"));
    }
    Ok(if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    })
}

pub fn table2(a: &GridArgs, mode: Mode) -> CliResult<OutputRecord> {
    let ns = grid_sizes(&a.n, &tables::VARIANCE_N)?;
    let cells = variance_grid(&variance_layout(&ns, !a.no_limit), &a.p, mode)?;
    Ok(grid_record("table2", cells, VARIANCE_DECIMALS, true, mode))
}

pub fn table3(a: &GridArgs, mode: Mode) -> CliResult<OutputRecord> {
    let ns = grid_sizes(&a.n, &tables::EXCESS_N)?;
    let cells = excess_grid(&excess_layout(&ns, !a.no_limit), &a.p, mode)?;
    Ok(grid_record("table3", cells, EXCESS_DECIMALS, false, mode))
}

fn matrix_key(name: &str, i: impl ToString, j: impl ToString) -> [(&'static str, String); 3] {
    [
        ("quantity", name.to_string()),
        ("i", i.to_string()),
        ("j", j.to_string()),
    ]
}

pub fn sigma_cmd(a: &SigmaArgs, mode: Mode) -> CliResult<OutputRecord> {
    let cov = sigma(a.n, a.p, numeric(mode))?;
    let mut rec = OutputRecord::new("sigma", mode)
        .input("n", a.n)
        .input("p", a.p);
    for i in 0..a.n {
        for j in 0..a.n {
            rec.push(
                Row::new(&matrix_key("sigma", i + 1, j + 1), cov.get(i, j))
                    .with_exact(cov.exact_get(i, j).map(exact_string)),
            );
        }
    }
    let key = |name: &str, i: String| matrix_key(name, i, "").to_vec();
    let eig = if a.eigen || a.check_conjecture {
        let eig = eigen_spectrum(&cov, DEFAULT_TOL)?;
        if a.eigen {
            for (i, &l) in eig.iter().enumerate() {
                rec.push(Row::new(&key("eigenvalue", (i + 1).to_string()), l));
            }
        }
        eig
    } else {
        Vec::new()
    };
    if a.check_conjecture {
        let two_p = 2.0 * a.p.p();
        rec.push(Row::new(&key("max-eigenvalue", String::new()), eig[0]));
        rec.push(Row::new(&key("two-p", String::new()), two_p));
        rec.push(Row::new(
            &key("max-eigenvalue-minus-two-p", String::new()),
            eig[0] - two_p,
        ));
    }
    Ok(rec)
}

pub fn eigen(a: &EigenArgs, mode: Mode) -> CliResult<OutputRecord> {
    let cov = sigma(a.n, a.p, numeric(mode))?;
    let mut rec = OutputRecord::new("eigen", mode)
        .input("n", a.n)
        .input("p", a.p)
        .input("tol", a.tol);
    let cap = a.max_rotations.unwrap_or(100 * a.n * a.n);
    let eig = bcd_core::eigen::symmetric_eigenvalues_capped(cov.entries(), cov.n(), a.tol, cap)?;
    for (i, &l) in eig.iter().enumerate() {
        rec.push(Row::new(&quantity("eigenvalue", i + 1), l));
    }
    if a.n >= 2 {
        rec.push(Row::new(
            &quantity("two-p-residual", ""),
            eigenpair_residual(&cov),
        ));
        rec.push(Row::new(
            &quantity("max-eigenvalue-minus-two-p", ""),
            eig[0] - 2.0 * a.p.p(),
        ));
    }
    Ok(rec)
}

/// `1/2 P(D_{j-1} = 0) + p (1 - P(D_{j-1} = 0))` in rational arithmetic.
fn selection_bias_step_exact(exact: &Exact, j: usize) -> BigRational {
    let balanced = mass_with(exact, j - 1, 0);
    exact.half() * balanced.clone() + exact.p() * (BigRational::from_integer(1.into()) - balanced)
}

pub fn selection_bias(a: &SelectionBiasArgs, mode: Mode) -> CliResult<OutputRecord> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let n = a.n;
    let mut rec = OutputRecord::new("selection-bias", mode)
        .input("n", n)
        .input("p", a.p);
    let half_n = BigRational::new(BigInt::from(n), BigInt::from(2));
    let n_big = BigRational::from_integer(BigInt::from(n));
    let total = || Ok(total_selection_bias(n, a.p)?);
    let total_exact = || Ok(total_selection_bias_exact(n, a.p)?);
    rec.push(valued(&quantity("total", ""), mode, total, total_exact)?);
    rec.push(valued(
        &quantity("expected-by-chance", ""),
        mode,
        || Ok(n as f64 / 2.0),
        || Ok(half_n.clone()),
    )?);
    rec.push(valued(
        &quantity("excess", ""),
        mode,
        || Ok(total()? - n as f64 / 2.0),
        || Ok(total_exact()? - half_n.clone()),
    )?);
    rec.push(valued(
        &quantity("average-excess", ""),
        mode,
        || Ok((total()? - n as f64 / 2.0) / n as f64),
        || Ok((total_exact()? - half_n.clone()) / n_big.clone()),
    )?);
    rec.push(valued(
        &quantity("asymptotic-excess", ""),
        mode,
        || Ok(asymptotic_excess(a.p)),
        || Ok(asymptotic_excess_exact(a.p)?),
    )?);
    if a.per_step {
        let exact = match mode {
            Mode::Rational => Some(Exact::for_size(a.p, n)?),
            Mode::Float => None,
        };
        for j in 1..=n {
            let row = match &exact {
                Some(e) => exact_cell(&selection_bias_step_exact(e, j)),
                None => Row::new::<&str, &str>(&[], selection_bias_step(j, a.p)?),
            };
            rec.push(Row {
                key: quantity("step", j)
                    .map(|(k, v)| (k.to_string(), v))
                    .to_vec(),
                ..row
            });
        }
    }
    Ok(rec)
}

fn check_len(what: &str, got: usize, expected: Option<usize>) -> CliResult<()> {
    match expected {
        Some(n) if n != got => Err(CliError::usage(format!(
            "{what} has {got} values but --n is {n}"
        ))),
        _ if got == 0 => Err(CliError::usage(format!("{what} is empty"))),
        _ => Ok(()),
    }
}

pub fn accidental(a: &AccidentalBiasArgs, mode: Mode) -> CliResult<OutputRecord> {
    let mut z = read_scores(&a.z)?;
    check_len("z", z.len(), a.n)?;
    if a.normalize {
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(CliError::usage("z is the zero vector"));
        }
        z.iter_mut().for_each(|x| *x /= norm);
    }
    let cov = sigma(z.len(), a.p, numeric(mode))?;
    let bias = accidental_bias(&z, &cov)?;
    let mut rec = OutputRecord::new("accidental-bias", mode)
        .input("n", z.len())
        .input("p", a.p);
    rec.push(Row::new(&[("quantity", "accidental-bias")], bias));
    let eig = eigen_spectrum(&cov, DEFAULT_TOL)?;
    rec.push(Row::new(&[("quantity", "max-eigenvalue")], eig[0]));
    Ok(rec)
}

pub fn ranktest(a: &RanktestArgs, mode: Mode) -> CliResult<OutputRecord> {
    let values = read_scores(&a.scores)?;
    check_len("score file", values.len(), a.n)?;
    let scores = if a.ranks {
        ScoreVector::centered_ranks(&values)
    } else if a.center {
        ScoreVector::centered(values)
    } else {
        ScoreVector::raw(values)
    };
    let n = scores.len();
    let cov = sigma(n, a.p, numeric(mode))?;
    let variance = rank_statistic_variance(&scores, &cov)?;
    let sd = variance.max(0.0).sqrt();
    let (sequence, source) = match &a.assignments {
        Some(path) => {
            let t = read_assignments(path)?;
            check_len("assignment file", t.len(), Some(n))?;
            (
                TreatmentSequence::from_assignments(t, a.seed)?,
                path.display().to_string(),
            )
        }
        None => (
            generate_sequence(n, a.p, a.seed)?,
            format!("seed {}", a.seed),
        ),
    };
    let w = rank_statistic(&sequence, &scores)?;
    let mut rec = OutputRecord::new("ranktest", mode)
        .input("n", n)
        .input("p", a.p)
        .input("observed", source);
    rec.push(Row::new(&[("quantity", "w")], w));
    rec.push(Row::new(&[("quantity", "variance")], variance));
    rec.push(Row::new(&[("quantity", "sd")], sd));
    if sd > 0.0 {
        rec.push(Row::new(&[("quantity", "z")], w / sd));
    }
    if a.simulate {
        rec = rec.input("reps", a.reps).input("seed", a.seed);
        let sim = simulate_rank_test(scores.scores(), a.p, w, a.reps, a.seed)?;
        rec.push(Row::new(&[("quantity", "mc-p-value")], sim.p_value));
        rec.push(Row::new(&[("quantity", "mc-sd")], sim.sd()));
        rec.push(Row::new(
            &[("quantity", "mc-sd-std-error")],
            sim.sd_std_error(),
        ));
        rec.push(Row::new(&[("quantity", "replicates")], a.reps as i64));
    }
    Ok(rec)
}

/// Exact expectation of a named statistic over sequences of length `n`.
pub fn statistic_exact(stat: Statistic, n: usize, params: DesignParams) -> CliResult<BigRational> {
    let exact = Exact::for_size(params, n)?;
    Ok(match stat {
        Statistic::Balance => mass_with(&exact, n, 0),
        Statistic::Variance => var_dn_exact(n, params)?,
        Statistic::SelectionBias => selection_bias_step_exact(&exact, n),
        Statistic::Cov(i, j) => {
            if i.max(j) > n {
                return Err(CliError::usage("cov indices must lie in 1..=n"));
            }
            let cov = sigma(i.max(j), params, NumericMode::ExactRational)?;
            cov.exact_get(i - 1, j - 1)
                .expect("rational sigma carries exact entries")
                .clone()
        }
    })
}

pub fn simulate(a: &SimulateArgs, mode: Mode) -> CliResult<OutputRecord> {
    let stat: Statistic = a.statistic.parse().map_err(|_| {
        CliError::usage(format!(
            "unknown statistic {:?}; expected balance, variance, selection-bias or cov(i,j)",
            a.statistic
        ))
    })?;
    let n = match (a.n, stat) {
        (Some(n), _) => n,
        (None, Statistic::Cov(..)) => stat.min_len(),
        (None, _) => return Err(CliError::usage("--n is required for this statistic")),
    };
    if n < stat.min_len() {
        return Err(CliError::usage(format!(
            "--n must be at least {}",
            stat.min_len()
        )));
    }
    let exact_row = valued(
        &[("quantity", "exact".to_string())],
        mode,
        || Ok(stat.exact(n, a.p)?),
        || statistic_exact(stat, n, a.p),
    )?;
    let exact_value = match exact_row.value {
        Cell::Num(v) => v,
        _ => unreachable!("exact values are numeric"),
    };
    let eval = |path: &[i8], rng: &mut ChaCha8Rng| stat.eval(path, rng);
    let est = par_estimate(n, a.p, &eval, a.reps, a.seed)?;
    let mut rec = OutputRecord::new("simulate", mode)
        .input("statistic", &a.statistic)
        .input("n", n)
        .input("p", a.p)
        .input("reps", a.reps)
        .input("seed", a.seed);
    rec.push(Row::new(&[("quantity", "estimate")], est.point));
    rec.push(Row::new(&[("quantity", "std-error")], est.std_error));
    rec.push(Row::new(
        &[("quantity", "replicates")],
        est.replicates as i64,
    ));
    rec.push(exact_row);
    let z = est.z_score(exact_value);
    rec.push(Row::new(
        &[("quantity", "z-score")],
        if z.is_finite() {
            Cell::Num(z)
        } else {
            Cell::Text("inf".into())
        },
    ));
    Ok(rec)
}
