//! End-to-end pipelines over the `evmelt` toolkit, driven by one TOML config.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::CliError;
pub use pipeline::{run, Command, Options};
