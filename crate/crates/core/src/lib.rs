//! Deterministic building blocks for robot-native motion pipelines.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod curriculum;
pub mod error;
pub mod generation;
pub mod gmt;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod prefix_loop;
pub mod router;

pub use error::{Error, Result};
