//! Pipeline runner for recovery-informed forecasting.
//!
//! [`config`] parses the TOML run description, [`data`] loads and checks the
//! inputs, [`pipeline`] executes the stages and [`generate`] writes a
//! self-contained synthetic dataset with a known recovery path.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod data;
pub mod error;
pub mod generate;
pub mod manifest;
pub mod pipeline;
pub mod rng;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use manifest::RunManifest;
pub use pipeline::{run, run_stages, Stage};
