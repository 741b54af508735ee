//! Fuzzy fractional calculus of variations.

pub mod error;
pub mod frac_ops;
pub mod fuzzy_core;
pub mod linalg;
pub mod problems;
pub mod solver;
pub mod transversality;
pub mod variational;

pub use error::{Error, Result};
