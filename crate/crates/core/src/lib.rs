//! Numerical machinery for the local law of the anticommutator `UV + VU` of
//! independent Wigner matrices.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod freelaw;
pub mod io;
pub mod linalg;
pub mod linearize;
pub mod locallaw;
pub mod sdcore;
pub mod tails;
pub mod wigner;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
