#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod green;
pub mod materials;
pub mod mie;
pub mod quad;
pub mod scaled;
pub mod specfun;
pub mod stress;

pub use error::{Error, Result};
