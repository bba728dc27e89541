#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod control;
pub mod dynamics;
pub mod error;
pub mod identification;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod regressor;
pub mod robots;
pub mod spatial;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::SprModel;
