use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("Kraus operators are not complete (deviation {0:e})")]
    Incomplete(f64),

    #[error("channel annihilates the subspace image; quenched denominator is zero")]
    ZeroDenominator,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("non-finite cost encountered during optimization")]
    NonFiniteCost,

    #[error("noise state lies entirely in the ideal subspace (c = 1)")]
    DegenerateNoise,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("target error not reached within {iterations} iterations: trace {trace:?}")]
    Unreachable { iterations: usize, trace: Vec<f64> },

    #[error("malformed mesh layout: {0}")]
    MalformedMesh(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
