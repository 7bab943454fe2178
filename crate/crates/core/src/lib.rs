#![no_std]

extern crate alloc;

mod error;
mod math;

pub mod cascade;
pub mod hand;
pub mod metric;
pub mod pso;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
