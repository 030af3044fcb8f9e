//! Bayesian in-context decision making.
// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod agents;
pub mod envs;
pub mod error;
pub mod evidence;
pub mod fusion;
pub mod harness;
pub mod priors;
pub mod seed;
pub mod training;

pub use error::{Result, SpiceError};
