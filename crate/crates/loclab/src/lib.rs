//! Numerical laboratory for localization in one dimension.
//!
//! The crate builds finite windows of the potential families that drive
//! pure-point spectrum results for 1D discrete Schrödinger operators
//! (correlated random, limit-periodic, quasi-periodic bump potentials),
//! diagonalizes the Dirichlet restrictions with a Sturm-bisection
//! eigensolver, estimates eigenfunction correlators by Monte Carlo, and
//! cross-checks every finite identity of the underlying integral-operator
//! method with brute-force oracles.

pub mod diophantine;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod ksoperators;
pub mod localization;
pub mod potentials;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
