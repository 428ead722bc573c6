#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod effective;
pub mod error;
pub mod measure;
pub mod rate;
pub mod scenario;
pub mod sim;
pub mod torus;

pub use error::{Error, Result};
