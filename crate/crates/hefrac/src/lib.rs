//! Configuration, file formats, campaign orchestration and the command line
//! for the `hefrac-core` virtual SENT simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod output;
pub mod run;
pub mod vtk;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
