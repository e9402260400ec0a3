//! Multi-UAV navigation simulator with a depth-camera SAC+AE trainer.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod camera;
pub mod config;
pub mod episode;
mod error;
pub mod eval;
pub mod nets;
pub mod observation;
pub mod policy;
pub mod replay;
pub mod reward;
pub mod scenario;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
