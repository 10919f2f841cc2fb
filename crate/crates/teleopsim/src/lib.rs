//! Command line, file formats and live service around `teleop-core`.

pub mod cli;
pub mod error;
pub mod files;
pub mod service;
pub mod settings;

pub use error::{Error, Result};
