//! Cost-constrained credit portfolio optimization on scenario samples.
//!
//! CVaR and its Euler contributions are computed from a discrete scenario
//! matrix, a closed-form projection step moves the group weights under a
//! quadratic cost budget, and a continuation driver chains steps along a
//! cost grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuation;
pub mod error;
pub mod io;
pub mod oracle;
pub mod projection;
pub mod risk;

pub use error::{Error, Result};
