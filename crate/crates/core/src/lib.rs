//! Large-gap asymptotics of the confluent hypergeometric kernel determinant on
//! a union of real intervals, together with a direct Nyström oracle.

// NaN-rejecting `!(x > 0.0)` checks and index loops over several arrays are
// deliberate in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod dd;
pub mod error;
pub mod kernel;
pub mod nystrom;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod surface;
pub mod szego;
pub mod theta;

pub use error::{Error, Result};
