//! Experiment runner for qudit autoencoder denoising: TOML-configured grid
//! sweeps written as CSV with a JSON sidecar, the closed-form oracle suite,
//! and the invariant validation harness.

pub mod config;
pub mod experiments;
pub mod oracle;
pub mod table;
pub mod validate;

pub use config::{ExperimentConfig, Overrides};
pub use experiments::run;
pub use table::SweepResult;
