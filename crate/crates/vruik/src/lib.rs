//! File formats, batch annotation and the `vruik` command line, built on
//! [`vruik_core`].

pub mod cli;
pub mod clip;
pub mod config;
pub mod datasetio;
pub mod error;
pub mod formats;
pub mod plot;

pub use error::{Result, VruikError};
