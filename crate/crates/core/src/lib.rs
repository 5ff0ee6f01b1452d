//! Direct collocation for first-, second- and Mth-order dynamical systems.
//!
//! The crate transcribes optimal control problems with trapezoidal and
//! Hermite-Simpson schemes of any dynamics order, solves the resulting NLP
//! with a built-in augmented-Lagrangian solver, and measures the dynamic
//! error of the reconstructed trajectories.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod problems;
pub mod schemes;
pub mod solver;
pub mod transcribe;

pub use error::{Error, Result};
