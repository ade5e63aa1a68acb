#![no_std]
extern crate alloc;

pub mod ahpl;
pub mod certificates;
pub mod error;
pub mod extension;
pub mod hyperbolic;
pub mod matcalc;
pub mod puzzles;
pub mod realbounds;
pub mod scalar;
pub mod sum;
pub mod unimodal;

pub use error::{Error, Result};
