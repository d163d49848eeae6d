//! Arbitrary-precision dense linear algebra for small square systems.
//!
//! Every value is an MPFR float whose precision is fixed by a
//! [`PrecisionContext`]; results inherit the precision of their inputs.

mod lu;
mod matrix;
mod precision;
mod svd;
mod vector;

use thiserror::Error;

pub use lu::{lu_solve, LuFactorization};
pub use matrix::{rank_one_update, Matrix};
pub use precision::{PrecisionContext, GUARD_BITS};
pub use svd::singular_values;
pub use vector::Vector;

/// Arbitrary-precision scalar. Overflow shows up as a non-finite value.
pub type Real = rug::Float;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },
    #[error("Jacobi iteration did not converge after {rotations} rotations")]
    NoConvergence { rotations: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("invalid precision: {0}")]
    InvalidPrecision(String),
    #[error("invalid numeric literal {0}")]
    InvalidLiteral(String),
}
