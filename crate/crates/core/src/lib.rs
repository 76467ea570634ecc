pub mod duhamel;
pub mod error;
pub mod expr;
pub mod fractional;
pub mod harness;
pub mod linalg;
#[cfg(feature = "validation")]
pub mod oracles;
mod par;
pub mod regularization;
pub mod solution;
pub mod special;
pub mod stochastic;

pub use error::{Error, Result};
