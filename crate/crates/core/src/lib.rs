//! Explicit solution theory for μ-Caputo neutral fractional systems with
//! several discrete delays:
//!
//! ```text
//! D^α_μ [ w(t) − Σ A_j w(t − r_j) ] = B w(t) + Σ F_j w(t − r_j) + ℸ(t, w(t)),   t ∈ (0, T]
//! w(t) = φ(t),                                                                 t ∈ [−r, 0]
//! ```
//!
//! The crate builds the coefficient lattice `Q_{k+1}(i)`, evaluates the
//! delayed Mittag-Leffler type matrix function `X^{α,β}_μ(t, s)`, assembles the
//! closed-form solution, runs Picard iteration for the semilinear case, and
//! cross-checks everything against an independent product-integration solver.

// `!(x > 0.0)` and friends are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod mlf;
pub mod mu_calculus;
pub mod oracle;
pub mod q_lattice;
pub mod solver;
pub mod system;
pub mod trajectory;

pub use error::{Error, ExprError, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Maximum-row-sum norm, the operator norm induced by the vector ∞-norm.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
