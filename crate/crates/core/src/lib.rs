// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod grassmann;
pub mod horseshoe;
pub mod modulus;
pub mod pressure;
pub mod report;
pub mod rng;
pub mod shift;
pub mod srb;
pub mod systems;

pub use error::{Error, Result};
