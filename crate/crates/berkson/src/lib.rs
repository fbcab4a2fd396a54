//! Simulation toolkit for threshold learning with uniform Berkson query noise.
//!
//! The model: a learner queries points `w` of a one-dimensional domain, each
//! query is perturbed by unobserved uniform noise of half-width `sigma`, and
//! a binary label is drawn from a regression function `m` evaluated at the
//! perturbed point. The crate provides:
//!
//! - construction and validation of margin-controlled regression functions
//!   ([`function_class`]);
//! - exact and quadrature convolutions of those functions with the uniform
//!   noise kernel ([`convolution`]);
//! - a budgeted, reproducible noisy oracle ([`oracle`]);
//! - passive and active threshold estimators ([`estimators`]);
//! - two-hypothesis information-theoretic lower-bound diagnostics
//!   ([`lowerbound`]);
//! - a Monte-Carlo harness that fits empirical convergence rates and checks
//!   them against the theoretical exponents ([`harness`]).

pub mod cli;
pub mod convolution;
pub mod error;
pub mod function_class;
pub mod oracle;

pub use error::{Error, Result};
