//! File formats, parallel batch processing and the `handpose` command-line
//! driver on top of `handpose-core`.

pub mod bundle;
pub mod config;
pub mod dataset;
mod error;
pub mod pipeline;
pub mod report;

pub use error::{Category, Error, Result};
