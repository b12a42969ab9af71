//! Denoising qudit states with quantum autoencoders.
//!
//! The crate simulates an N-dimensional qudit through a noise channel, an
//! encoder unitary, a projection onto K latent modes with post-selection, and
//! a decoder unitary. It provides closed-form spectral training, variational
//! fidelity training over an MZI-mesh parameterization, the full catalog of
//! qudit noise channels, and the analytic fidelity formulas and bounds that
//! serve as oracles for Monte Carlo runs.

pub mod analytics;
pub mod applications;
pub mod channels;
pub mod denoiser;
pub mod error;
pub mod mesh;
pub mod optim;
pub mod qstate;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
