//! Numerical laboratory for the partition function and local maxima of the
//! Riemann zeta function on short intervals of the critical line, together
//! with the random multiplicative model and the analytic tools used to study
//! them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx_fn;
pub mod ballot;
pub mod checks;
pub mod cli;
pub mod config;
pub mod dirichlet_poly;
pub mod error;
pub mod ladders;
pub mod numeric;
pub mod partition;
pub mod primes;
pub mod random_model;
pub mod zeta_eval;

pub use error::{Error, Result};
