use bcd_core::bias::{accidental_bias, asymptotic_excess, selection_bias_report};
use bcd_core::covariance::{cond_assignment, first_visit_table, joint_assignment, sigma};
use bcd_core::eigen::{eigen_spectrum, DEFAULT_TOL};
use bcd_core::numeric::{Arith, Exact, StableFloat};
use bcd_core::pmf::{dp_pmf_dn, dp_pmf_dn_exact, mass_term_factors, pmf_dn, var_dn};
use bcd_core::simulate::{enumerate_exact, replicate_rng, uniform};
use bcd_core::stationary::{asymptotic_var, Parity};
use bcd_core::{DesignParams, NumericMode};
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

fn grid() -> Vec<DesignParams> {
    [(1, 2), (3, 5), (2, 3), (7, 10), (4, 5), (9, 10), (1, 1)]
        .into_iter()
        .map(|(n, d)| DesignParams::from_ratio(n, d).unwrap())
        .collect()
}

#[test]
fn normalization_and_symmetry_up_to_200() {
    for params in grid() {
        for n in (1..=200).step_by(7).chain([199, 200]) {
            let pmf = pmf_dn(n, params, NumericMode::stable()).unwrap();
            assert!((pmf.total() - 1.0).abs() < 1e-10, "n={n} p={params}");
            for (k, m) in pmf.iter() {
                assert_eq!(m, pmf.mass(-k));
            }
        }
    }
}

#[test]
fn exact_normalization() {
    for params in grid() {
        for n in [1, 2, 3, 10, 33] {
            let pmf = pmf_dn(n, params, NumericMode::ExactRational).unwrap();
            assert!(pmf.exact_total().unwrap().is_one());
        }
    }
}

#[test]
fn closed_form_matches_recurrence() {
    for params in grid() {
        for n in 1..=100 {
            let a = pmf_dn(n, params, NumericMode::stable()).unwrap();
            let b = dp_pmf_dn(n, params).unwrap();
            for (k, m) in a.iter() {
                assert!((m - b.mass(k)).abs() < 1e-12, "n={n} k={k} p={params}");
            }
        }
        for n in 1..=40 {
            assert_eq!(
                pmf_dn(n, params, NumericMode::ExactRational).unwrap(),
                dp_pmf_dn_exact(n, params).unwrap()
            );
        }
    }
}

#[test]
fn fair_coin_dp_matches_closed_form_at_n12() {
    let params = DesignParams::new(0.6).unwrap();
    let a = pmf_dn(12, params, NumericMode::stable()).unwrap();
    let b = dp_pmf_dn(12, params).unwrap();
    assert!(a.iter().all(|(k, m)| (m - b.mass(k)).abs() < 1e-12));
}

#[test]
fn variance_monotone_in_p_and_n() {
    let ps: Vec<f64> = grid().iter().map(|p| p.p()).collect();
    for n in [5, 10, 15, 20, 25, 50, 75] {
        let vars: Vec<f64> = ps
            .iter()
            .map(|&p| var_dn(n, DesignParams::new(p).unwrap()).unwrap())
            .collect();
        assert!(
            vars.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "n={n}: {vars:?}"
        );
    }
    for params in grid() {
        for start in [1, 2] {
            let vars: Vec<f64> = (start..=120)
                .step_by(2)
                .map(|n| var_dn(n, params).unwrap())
                .collect();
            assert!(vars.windows(2).all(|w| w[1] >= w[0] - 1e-12), "p={params}");
        }
    }
}

#[test]
fn variance_converges_to_limit() {
    for p in [0.7, 0.8, 0.9] {
        let params = DesignParams::new(p).unwrap();
        for n in 150..=200 {
            let limit = asymptotic_var(params, Parity::of(n as u64)).unwrap();
            let v = var_dn(n, params).unwrap();
            assert!((v - limit).abs() <= 0.005 * limit, "p={p} n={n}");
        }
    }
}

/// Probability that the walk started at `k > 0` has been absorbed at zero by
/// step `u`, by iterating the absorbing chain.
fn absorbed_by(k: usize, horizon: usize, params: DesignParams) -> Vec<f64> {
    let width = k + horizon + 2;
    let mut alive = vec![0.0; width];
    alive[k] = 1.0;
    let mut absorbed = 0.0;
    let mut out = vec![0.0];
    for _ in 0..horizon {
        let mut next = vec![0.0; width];
        for (j, &m) in alive.iter().enumerate().skip(1) {
            if m == 0.0 {
                continue;
            }
            if j == 1 {
                absorbed += m * params.p();
            } else {
                next[j - 1] += m * params.p();
            }
            if j + 1 < width {
                next[j + 1] += m * params.q();
            }
        }
        alive = next;
        out.push(absorbed);
    }
    out
}

#[test]
fn first_visit_matches_absorbing_chain() {
    for params in grid().into_iter().skip(1) {
        let table = first_visit_table(params, 5, 400);
        for k in 1..=5usize {
            let chain = absorbed_by(k, 400, params);
            for u in 0..=400 {
                assert!(
                    (table.f_hat(k as i64, u) - chain[u]).abs() < 1e-12,
                    "k={k} u={u} p={params}"
                );
            }
        }
    }
}

#[test]
fn first_visit_mass_is_absorbed() {
    for params in grid().into_iter().skip(1) {
        let table = first_visit_table(params, 5, 400);
        // the tail at p = 3/5 decays like (2 sqrt(pq))^u and is still ~1e-5 at u = 400
        let slack = if params.p() < 0.65 { 1e-4 } else { 1e-6 };
        for k in -5i64..=5 {
            assert!(table.f_hat(k, 400) >= 1.0 - slack, "k={k} p={params}");
            let mut last = 0.0;
            for u in 0..=400 {
                let v = table.f_hat(k, u);
                assert!(v >= last && v <= 1.0 + 1e-12);
                last = v;
                assert_eq!(table.f(k, u), table.f(-k, u));
                if k != 0
                    && (u < k.unsigned_abs() as usize || (u - k.unsigned_abs() as usize) % 2 == 1)
                {
                    assert_eq!(table.f(k, u), 0.0);
                }
            }
        }
    }
}

#[test]
fn first_visit_shift_identity() {
    for params in grid() {
        let table = first_visit_table(params, 2, 200);
        for n in 2..=200 {
            let lhs = table.f_hat(1, n - 1);
            let rhs = params.p() + params.q() * table.f_hat(2, n - 2);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}

#[test]
fn joint_decomposes_into_conditionals() {
    for params in grid() {
        let t = |k: i64| match k.signum() {
            0 => 0.5,
            1 => params.q(),
            _ => params.p(),
        };
        for n in 1..=8usize {
            let prev = if n == 1 {
                None
            } else {
                Some(pmf_dn(n - 1, params, NumericMode::stable()).unwrap())
            };
            for m in n + 1..=14 {
                let mut sum = 0.0;
                for k in -(n as i64) + 1..=n as i64 - 1 {
                    let d = prev
                        .as_ref()
                        .map_or(if k == 0 { 1.0 } else { 0.0 }, |p| p.mass(k));
                    sum += cond_assignment(m as u64, n as u64, k + 1, params) * d * t(k);
                }
                let joint = joint_assignment(n, m, params).unwrap();
                assert!((joint - sum).abs() < 1e-14, "n={n} m={m} p={params}");
            }
        }
    }
}

#[test]
fn conditional_assignment_against_enumeration() {
    // P(T_{n+3} = 1 | D_n = 1) at p = 2/3 by summing over paths
    let params = DesignParams::from_ratio(2, 3).unwrap();
    let n = 3;
    let mut joint = 0.0;
    let mut marginal = 0.0;
    bcd_core::simulate::enumerate_paths(n + 3, params, |path, w| {
        let d: i64 = path[..n].iter().map(|&t| t as i64).sum();
        if d == 1 {
            marginal += w;
            if path[n + 2] == 1 {
                joint += w;
            }
        }
    })
    .unwrap();
    let (p, q) = (params.p(), params.q());
    assert!((joint / marginal - (p / 2.0 - p * q + q)).abs() < 1e-14);
    assert!((cond_assignment(n as u64 + 3, n as u64, 1, params) - joint / marginal).abs() < 1e-14);
}

#[test]
fn spectral_conjecture_report() {
    // Reported only: the largest eigenvalue equals 2p is not a theorem.
    let mut worst: f64 = 0.0;
    for params in grid() {
        let full = sigma(50, params, NumericMode::stable()).unwrap();
        for n in [2, 3, 4, 10, 25, 50] {
            let eig = eigen_spectrum(&full.leading(n), DEFAULT_TOL).unwrap();
            worst = worst.max((eig[0] - 2.0 * params.p()).abs());
        }
    }
    eprintln!("max |lambda_max - 2p| over the grid: {worst:e}");
}

#[test]
fn accidental_bias_within_rayleigh_bounds() {
    for params in grid() {
        for n in [3, 8, 20] {
            let cov = sigma(n, params, NumericMode::stable()).unwrap();
            let eig = eigen_spectrum(&cov, DEFAULT_TOL).unwrap();
            let mut rng = replicate_rng(n as u64, 9);
            for _ in 0..100 {
                let mut z: Vec<f64> = (0..n).map(|_| uniform(&mut rng) - 0.5).collect();
                let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                z.iter_mut().for_each(|x| *x /= norm);
                let b = accidental_bias(&z, &cov).unwrap();
                assert!(b <= eig[0] + 1e-8 && b >= eig[n - 1] - 1e-8);
            }
        }
    }
}

#[test]
fn selection_bias_report_invariants() {
    for params in grid().into_iter().filter(|p| !p.is_deterministic()) {
        let r = (params.p() / params.q() - 1.0) / (4.0 * params.p() / params.q());
        for n in 1..=300 {
            let report = selection_bias_report(n, params).unwrap();
            assert_eq!(report.per_step[0], 0.5);
            assert!(report
                .per_step
                .iter()
                .all(|&s| s >= 0.5 - 1e-15 && s <= params.p() + 1e-15));
            assert!((report.total - report.per_step_total()).abs() < 1e-10);
            assert!(report.excess >= -1e-12);
            if n >= 5 {
                assert!(report.average_excess <= r + 0.02);
            }
            // the gap decays like c/n and stays above 0.002 up to n = 113 at p = 9/10
            if n >= 120 && params.p() >= 0.6 {
                assert!(
                    (report.average_excess - asymptotic_excess(params)).abs() <= 0.002,
                    "n={n}"
                );
            }
        }
    }
}

#[test]
fn selection_bias_not_monotone_in_n() {
    let params = DesignParams::new(0.8).unwrap();
    let at = |n| selection_bias_report(n, params).unwrap().average_excess;
    assert!(at(10) > at(15));
}

#[test]
fn path_weights_sum_to_one() {
    for params in grid() {
        for n in [1, 5, 12, 16] {
            assert!((enumerate_exact(n, params, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stable_terms_match_exact(n in 1u64..=200, k_seed in 0u64..200, l_seed in 0u64..200,
                                pi in 0usize..7) {
        let params = grid()[pi];
        let k = (k_seed % (n + 1)) & !1 | (n & 1);
        prop_assume!(k <= n);
        let upper = if k == 0 { (n / 2).max(1) } else { (n - k) / 2 + 1 };
        let l = l_seed % upper;
        let term = mass_term_factors(n, k, l).unwrap();
        let exact = Exact::new(params).unwrap();
        let e = exact.to_f64(&exact.term(&term));
        let f = StableFloat::for_size(params, n as usize).term(&term);
        if e == 0.0 {
            prop_assert_eq!(f, 0.0);
        } else {
            prop_assert!(((f - e) / e).abs() <= 1e-12, "n={} k={} l={} f={} e={}", n, k, l, f, e);
        }
    }

    #[test]
    fn sigma_is_well_formed(n in 1usize..24, pi in 0usize..7) {
        let cov = sigma(n, grid()[pi], NumericMode::stable()).unwrap();
        for i in 0..n {
            prop_assert_eq!(cov.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(cov.get(i, j), cov.get(j, i));
                prop_assert!(cov.get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn exact_pmf_is_symmetric(n in 1usize..40, pi in 0usize..7) {
        let pmf = pmf_dn(n, grid()[pi], NumericMode::ExactRational).unwrap();
        for (k, _) in pmf.iter() {
            prop_assert_eq!(pmf.exact_mass(k), pmf.exact_mass(-k));
        }
        let total: BigRational = pmf.exact_total().unwrap();
        prop_assert!(total.is_one());
    }
}
