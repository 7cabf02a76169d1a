//! Smooth accelerating transonic flows in cylindrical ducts with an external
//! force: background flow, mixed-type linear solver, nonlinear potential and
//! Beltrami fixed points.

// Index loops over several coupled arrays read better than zipped iterators
// in the numerical kernels, and `!(a > b)` is used on purpose to catch NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod beltrami;
pub mod bgflow;
pub mod cli;
pub mod cutoff;
pub mod duct;
pub mod error;
pub mod fd;
pub mod grid;
pub mod jet;
pub mod mixed;
pub mod potential;
pub mod quad;
pub mod verify;
pub mod xsection;

pub use error::{Error, Result};
