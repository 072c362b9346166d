use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{factorize, Factorization, SparseSym, SymOperator};
use crate::error::{Error, Result};

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for small symmetric matrices. The input is
/// symmetrized first. Eigenvalues are returned in ascending order with the
/// eigenvectors as matching columns. `None` if the sweep cap is hit.
pub fn jacobi_eig(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = scale == 0.0 || n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] * m[(i, j)]).sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] * m[(i, j)]).sum();
        if off.sqrt() > 1e-15 * scale {
            return None;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let lambda = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let phi = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Some((phi, lambda))
}

/// Result of the power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenEig {
    pub lambda: f64,
    pub iterations: usize,
}

pub const DEFAULT_EIG_TOL: f64 = 1e-9;
pub const DEFAULT_EIG_MAX_ITER: usize = 100_000;

/// Largest eigenvalue of `K x = lambda M x` by power iteration on `M^{-1} K`
/// with a Rayleigh-quotient estimate, starting from a seeded random vector.
pub fn max_gen_eig(k: &dyn SymOperator, m: &SparseSym, tol: f64, max_iter: usize, seed: u64) -> Result<GenEig> {
    let fm = factorize(m)?;
    max_gen_eig_factored(k, m, &fm, tol, max_iter, seed)
}

pub fn max_gen_eig_factored(k: &dyn SymOperator, m: &SparseSym, fm: &Factorization, tol: f64, max_iter: usize, seed: u64) -> Result<GenEig> {
    let n = k.dim();
    if n != m.dim() || n != fm.dim() {
        return Err(Error::invalid("dimension mismatch in generalized eigenproblem"));
    }
    if n == 0 {
        return Err(Error::invalid("empty eigenproblem"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut kx = vec![0.0; n];
    let mut mx = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        k.apply(&x, &mut kx);
        m.spmv(&x, &mut mx);
        let lambda = dot(&x, &kx) / dot(&x, &mx);
        if it > 1 && (lambda - prev).abs() <= tol * lambda.abs() {
            return Ok(GenEig { lambda, iterations: it });
        }
        prev = lambda;
        fm.solve_in_place(&mut kx);
        let norm = kx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return Ok(GenEig { lambda: 0.0, iterations: it });
        }
        for (xi, yi) in x.iter_mut().zip(&kx) {
            *xi = yi / norm;
        }
    }
    Err(Error::PowerIterationNoConvergence { iterations: max_iter, estimate: prev })
}

/// `2 / sqrt(lambda_max)`; infinite when `lambda_max` is zero.
pub fn dt_from_lambda(lambda_max: f64) -> f64 {
    if lambda_max <= 0.0 {
        f64::INFINITY
    } else {
        2.0 / lambda_max.sqrt()
    }
}

/// Critical central-difference step of `(K, M)`.
pub fn dt_crit(k: &dyn SymOperator, m: &SparseSym, seed: u64) -> Result<f64> {
    Ok(dt_from_lambda(max_gen_eig(k, m, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITER, seed)?.lambda))
}
