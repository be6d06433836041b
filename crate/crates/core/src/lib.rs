//! Branching random walks, fixed points of the smoothing transform and
//! random walks killed below zero.
#![no_std]

extern crate alloc;

pub mod brw;
pub mod error;
pub mod exponent;
pub mod fixpoint;
pub mod fractal;
pub mod replicate;
pub mod rng;
pub mod rwalk;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
