// `!(x > 0)` guards also reject NaN; index loops follow the subscripts
// of the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Certified two-sided bounds on the optimal mean-square exponential
//! stabilizing rate of discrete-time linear systems with multiplicative
//! noise, computed by regularized normalized value iteration with
//! continuation, and validated by exact moment propagation and
//! reproducible Monte Carlo simulation.

pub mod certify;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod riccati;
pub mod rnvi;
pub mod simulate;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
