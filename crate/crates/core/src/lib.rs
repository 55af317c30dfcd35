#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fracops;
pub mod gamma;
pub mod mittag_leffler;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
