//! Decentralized Bayesian clustering by a recursive Metropolis-Hastings
//! naming game between Gaussian-mixture agents.

// `!(x > 0.0)` is how NaN gets rejected; index loops follow the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod data;
pub mod error;
pub mod game;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod rng;
