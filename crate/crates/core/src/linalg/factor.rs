use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use super::SparseSym;
use crate::error::{Error, Result};

/// Factored symmetric positive definite matrix.
pub enum Factorization {
    /// Structurally diagonal matrix; solves divide componentwise.
    Diagonal(Vec<f64>),
    /// Sparse Cholesky with an approximate-minimum-degree ordering.
    Cholesky { n: usize, llt: faer::sparse::linalg::solvers::Llt<usize, f64> },
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factorization::Diagonal(d) => write!(f, "Factorization::Diagonal(n = {})", d.len()),
            Factorization::Cholesky { n, .. } => write!(f, "Factorization::Cholesky(n = {n})"),
        }
    }
}

impl Factorization {
    pub fn dim(&self) -> usize {
        match self {
            Factorization::Diagonal(d) => d.len(),
            Factorization::Cholesky { n, .. } => *n,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Factorization::Diagonal(_))
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim());
        match self {
            Factorization::Diagonal(d) => {
                for (x, di) in b.iter_mut().zip(d) {
                    *x /= di;
                }
            }
            Factorization::Cholesky { n, llt } => {
                if *n > 0 {
                    llt.solve_in_place(MatMut::from_column_major_slice_mut(b, *n, 1));
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Factorizes `a`, taking the diagonal fast path when no off-diagonal entry
/// is stored. Non-positive pivots are reported as a definiteness error.
pub fn factorize(a: &SparseSym) -> Result<Factorization> {
    if a.is_structurally_diagonal() {
        let d = a.diagonal();
        if let Some(i) = d.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {}", d[i])));
        }
        return Ok(Factorization::Diagonal(d));
    }
    // Sequential factorization keeps results independent of the thread count.
    faer::set_global_parallelism(faer::Par::Seq);
    let n = a.dim();
    let mut lower = Vec::with_capacity(a.nnz() / 2 + n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            if c <= r {
                lower.push(Triplet::new(r, c, v));
            }
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
        .map_err(|e| Error::invalid(format!("cannot build sparse matrix: {e:?}")))?;
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("sparse Cholesky failed: {e}")))?;
    Ok(Factorization::Cholesky { n, llt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_solve() {
        let f = factorize(&SparseSym::from_diagonal(&[4.0; 3])).unwrap();
        assert!(f.is_diagonal());
        assert_eq!(f.solve(&[4.0, 8.0, 2.0]), vec![1.0, 2.0, 0.5]);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = SparseSym::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let f = factorize(&a).unwrap();
        assert!(!f.is_diagonal());
        let x = f.solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(matches!(factorize(&SparseSym::from_diagonal(&[1.0, -1.0])), Err(Error::NotPositiveDefinite(_))));
        let a = SparseSym::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(factorize(&a), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let b = DMatrix::from_fn(n, n, |_, _| if rng.gen_bool(0.15) { rng.gen_range(-1.0..1.0) } else { 0.0 });
        let a = &b * b.transpose() + DMatrix::identity(n, n);
        let s = SparseSym::from_dense(&a);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = factorize(&s).unwrap().solve(&rhs);
        let r: Vec<f64> = s.mul_vec(&x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&r) <= 1e-10 * (a.norm() * norm(&x) + norm(&rhs)));
    }
}
