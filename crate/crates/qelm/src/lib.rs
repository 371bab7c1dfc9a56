//! Simulation, analysis, and benchmarking toolkit for quantum extreme
//! learning machines (QELMs) in the Pauli-transfer-matrix formalism.
//!
//! The crate covers the full pipeline: product-state encodings and their
//! Pauli feature vectors, reservoir Hamiltonians and channel transfer
//! matrices, observable selection with temporal multiplexing, geometric and
//! statistical decodability scores, ridge-trained readouts, chaotic
//! benchmark systems, and extraction of the classical surrogate flow map.

pub mod capacity;
pub mod channels;
pub mod decodability;
pub mod dynsys;
pub mod encoding;
pub mod model;
pub mod pauli;
pub mod pipeline;
pub mod poly;
pub mod readout;
pub mod series;
pub mod surrogate;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum QelmError {
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("singular expansion point: {0}")]
    Singularity(String),
    #[error("unknown token: {0}")]
    UnknownToken(String),
    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },
    #[error("degenerate target variance: {0}")]
    DegenerateVariance(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QelmError>;
