use thiserror::Error;

/// Errors raised by the state algebra, element constructors and experiment drivers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid basis label `{label}`: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid measurement operator: {0}")]
    InvalidMeasurement(String),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("bad target qubits {targets:?} for a {num_qubits}-qubit register")]
    BadTargets { targets: Vec<usize>, num_qubits: usize },

    #[error("post-selection annihilated the state (probability {probability:.3e}) at `{label}`")]
    Annihilated { probability: f64, label: String },

    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("pipeline has no source state")]
    NoSource,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Bench(#[from] crate::bench::BenchError),

    #[error(transparent)]
    Fit(#[from] crate::fitting::FitError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
