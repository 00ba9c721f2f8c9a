#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod collision;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod inequalities;
pub mod interp;
pub mod kernel;
pub mod quadrature;
pub mod snapshot;
pub mod state;

pub use error::{Error, Result};
