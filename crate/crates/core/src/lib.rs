//! Translation of time-domain tracking specifications (overshoot, rise time,
//! settling time, tolerance band) into lower and upper frequency-domain bound
//! transfer functions, and verification of the bounds in the time domain.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod family;
pub mod racwe;
pub mod second_order;
pub mod simulate;
pub mod tf;
pub mod timing;

pub use error::{Error, Result};
