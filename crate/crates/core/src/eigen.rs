//! Dense symmetric eigenvalues by cyclic Jacobi rotations.

use alloc::vec::Vec;

use crate::covariance::AssignmentCovariance;
use crate::error::{Error, Result};

/// Default off-diagonal residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues of the row-major symmetric `n x n` matrix `a`, sorted in
/// descending order.
///
/// Sweeps of plane rotations annihilate off-diagonal entries until their
/// Frobenius norm is at most `tol`. Fails after `100 n^2` rotations.
pub fn symmetric_eigenvalues(a: &[f64], n: usize, tol: f64) -> Result<Vec<f64>> {
    symmetric_eigenvalues_capped(a, n, tol, 100 * n * n)
}

/// [`symmetric_eigenvalues`] with an explicit rotation cap.
pub fn symmetric_eigenvalues_capped(a: &[f64], n: usize, tol: f64, cap: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix entries must be finite"));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be non-negative"));
    }
    let mut m = a.to_vec();
    let mut rotations = 0usize;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if libm::sqrt(off) <= tol || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                if rotations >= cap {
                    return Err(Error::NoConvergence(rotations));
                }
                rotations += 1;
                rotate(&mut m, n, p, q);
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_unstable_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

fn rotate(m: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
    let t = if theta == 0.0 {
        1.0
    } else {
        let t = 1.0 / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
        if theta < 0.0 {
            -t
        } else {
            t
        }
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;
    for k in 0..n {
        let (akp, akq) = (m[k * n + p], m[k * n + q]);
        m[k * n + p] = c * akp - s * akq;
        m[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (m[p * n + k], m[q * n + k]);
        m[p * n + k] = c * apk - s * aqk;
        m[q * n + k] = s * apk + c * aqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
}

pub fn eigen_spectrum(cov: &AssignmentCovariance, tol: f64) -> Result<Vec<f64>> {
    symmetric_eigenvalues(cov.entries(), cov.n(), tol)
}
