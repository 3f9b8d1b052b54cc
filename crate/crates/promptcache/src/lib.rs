//! File formats, reports and the command-line driver for `promptcache-core`.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod jsonl;
pub mod report;
pub mod vectors;

pub use error::{Error, Result};
