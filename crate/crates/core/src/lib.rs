//! Arbitrary-precision laboratory for Broyden-type methods on nonlinear
//! systems whose Jacobian is singular at the root.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod diagnostics;
pub mod format;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod solvers;
