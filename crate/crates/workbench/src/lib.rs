//! File formats, checkpoints, report tables and the `citrus` command line
//! around `citrus-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod pipeline;
pub mod records_io;
pub mod report;

pub use error::{Result, WbError};
