//! File formats, run configuration, parameter sweeps and the `dcd` command
//! line around the [`dcd_core`] simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod config;
pub mod dax;
pub mod error;
pub mod output;
pub mod scenario;
pub mod spot;
pub mod sweep;
pub mod workflows;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use scenario::Scenario;
