#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod encoders;
mod error;
pub mod model;
pub mod objectives;
pub mod sde;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
