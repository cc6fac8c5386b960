//! Configuration, model artifact and stage commands of the `kkl` tool.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;

pub use artifact::ModelArtifact;
pub use config::PipelineConfig;
pub use error::{CliError, ErrorClass};
