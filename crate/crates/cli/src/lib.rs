//! Files, configuration and commands around `discovery-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod pacf;
pub mod pipeline;

pub use config::{ConfigArgs, RunConfig};
pub use error::CliError;
pub use pacf::{read_feature_file, write_feature_file, FeatureFile, PacfError};
pub use pipeline::{CalibrationArtifact, Snapshot, Truth};
