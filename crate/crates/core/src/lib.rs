// NaN-rejecting checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod color;
pub mod error;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod mil;

pub use error::{Error, ErrorKind, Result};
