//! Finite cell discretizations of the scalar wave equation on a rotated cube
//! with spectral (GLL-Lagrange) and B-spline bases, cut-cell stabilization,
//! mass lumping and explicit, implicit and IMEX time integration.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod stabilization;
pub mod timeint;
pub mod quadrature;

pub use error::{Error, Result};
