//! Lane-Emden problems on geodesically convex domains of the unit sphere.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
mod clock;
pub mod domain;
pub mod error;
pub mod field;
pub mod geometry;
pub mod oracle;
mod par;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
