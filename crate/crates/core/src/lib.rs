#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod dmd;
pub mod env;
pub mod error;
pub mod hinf;
pub mod linalg;
pub mod trajectory;

pub use error::{Error, Result};
