//! MNIST experiment harness for the compressive-sensing feature network:
//! IDX loading, seeded splits and noise, model files, PGM filter dumps and
//! the `csnet` command line.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model;
pub mod pgm;

pub use crate::config::ExperimentConfig;
pub use crate::error::{CsnetError, Result};
pub use crate::model::ModelFile;
