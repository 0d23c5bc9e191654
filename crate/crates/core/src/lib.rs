//! Simulation of single-photon two-qubit logic on polarization and momentum.
//!
//! A photon carries two qubits: polarization (H = 0, V = 1) and momentum
//! (T/R = 0, B/L = 1). Registers order qubits most-significant first, so a
//! single photon is `|P M⟩` and a pair is `|P_S M_S P_I M_I⟩`.

pub mod bench;
pub mod calibration;
pub mod counting;
pub mod elements;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod pipeline;
pub mod state;

pub use bench::{compile_bench, compile_text, parse_bench, BenchError, BenchProgram};
pub use counting::{accidental_rate, sample_counts, CountingConfig, RNG_ALGORITHM};
pub use elements::{Element, ElementKind, ImperfectionSet, Photon};
pub use error::{Error, Result};
pub use fitting::{fit_malus, fit_sin_squared, visibility, FitError, FitResult, Visibility};
pub use pipeline::{Pipeline, RunOutcome};
pub use state::{concurrence, fidelity, DensityOp, Ket, State};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
