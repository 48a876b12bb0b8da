//! Library surface of the experiment runner, exposed for integration
//! tests and embedding.

pub mod config;
pub mod data;
pub mod manifest;
pub mod plot;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, Method};
pub use manifest::Manifest;
