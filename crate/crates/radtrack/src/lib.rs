//! File formats, pipeline configuration and the `radtrack` command line
//! on top of `radtrack-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod fsutil;
pub mod image;
pub mod rt4d;

pub use error::{CliError, Result};
pub use radtrack_core as core;
