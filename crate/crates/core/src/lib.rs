//! Reservoir pressure diffusion, seismicity-rate dynamics and a robust
//! closed-loop controller for fluid extraction and injection.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod diffusion;
pub mod error;
pub mod mesh;
pub mod par;
pub mod scenario;
pub mod seismicity;

pub use error::{Error, Result};
