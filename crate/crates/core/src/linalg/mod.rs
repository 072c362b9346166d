//! Sparse storage, direct solves and eigenvalue kernels.

mod eigen;
mod factor;
mod operator;
pub mod mm;
mod sparse;

pub use eigen::{dt_crit, dt_from_lambda, jacobi_eig, max_gen_eig, max_gen_eig_factored, GenEig, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL, JACOBI_MAX_SWEEPS};
pub use factor::{factorize, Factorization};
pub use operator::{Banded1D, SymOperator, TensorStiffness};
pub use sparse::{RowBlock, SparseSym};
