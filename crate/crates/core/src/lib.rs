//! Fisher-KPP fronts in media whose growth rate alternates between a fast
//! and a slow plateau on ever longer intervals.

// Parameter checks are written as `!(a < b)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod harness;
pub mod levelset;
pub mod media;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
