//! Model order reduction for linear systems with quadratic outputs (LQO).
//!
//! The crate provides balanced truncation (unlimited and frequency-limited), a fixed-point
//! H2-optimal iteration, its frequency-limited counterpart built on a bandpass-filter
//! approximation of the band resolvent integral, and the norms and residual diagnostics
//! used to judge the resulting reduced models.

// `!(x > t)` comparisons are deliberate: they reject NaN along with small values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandpass;
pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod gramians;
pub mod io;
pub mod model;
pub mod models;
pub mod reducers;
pub mod sparse;

#[cfg(test)]
extern crate self as lqo_core;
#[cfg(test)]
#[path = "../tests/common/mod.rs"]
mod oracles;
#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use model::{
    project, validate, validate_parts, FrequencyBand, HurwitzStatus, LqoSystem, Operator,
    ProjectionPair, RomSystem, ValidationReport,
};
