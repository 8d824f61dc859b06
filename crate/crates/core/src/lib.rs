//! Simulation and design evaluation for electric-field programmable spin arrays.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod spin;
pub mod field;
pub mod control;
pub mod thermal;
pub mod photonic;
pub mod repeater;
