//! Numerical laboratory for homogenization of Hamilton–Jacobi equations with
//! a localized defect in a periodic environment.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correctors;
pub mod effective;
pub mod ergodic;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod homogenized;
pub mod oracles;
pub mod output;
pub mod quadrature;
pub mod random;
pub mod solver;

pub use error::{Error, Result};
