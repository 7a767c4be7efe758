//! Joint routing, power control and congestion control for interference-limited
//! wireless networks, solved with node-local scaled gradient projection.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algorithms;
pub mod check;
pub mod error;
pub mod exp;
pub mod fixtures;
pub mod marginal;
pub mod model;
pub mod protocol;
pub mod scaling;

pub use error::{Error, Result};
