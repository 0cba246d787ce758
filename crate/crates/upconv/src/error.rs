//! Error type shared across the toolkit.

use thiserror::Error;

/// Unified error for all library operations.
///
/// Variants are grouped by failure class so the CLI can map them onto
/// process exit codes: configuration / validation problems, numerical
/// failures, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A wavelength fell outside the validity range of a dispersion model.
    #[error("wavelength {lambda_um:.6} um outside model validity range [{min_um}, {max_um}] um for `{model}`")]
    WavelengthOutOfRange {
        model: String,
        lambda_um: f64,
        min_um: f64,
        max_um: f64,
    },

    /// Invalid physical or geometric argument (negative depth, zero width, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration file or structural setup problem.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Two fields that must share a grid were sampled on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iterative numerical method failed to meet its tolerance.
    #[error("numerical convergence failure in {context}: {iterations} iterations, residual {residual:.3e}")]
    NumericalConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// A caller violated an operation contract (e.g. a non-energy-matched
    /// wavelength triple, or a conservation check requested on a lossy run).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The phase mismatch cannot be cancelled by any positive poling period.
    #[error("no quasi-phasematching solution: index mismatch {mismatch_per_um:.6e} 1/um is not positive")]
    NoQpmSolution { mismatch_per_um: f64 },

    /// A root or feature was not bracketed by the requested scan window.
    #[error("bracketing failure: {0}")]
    Bracketing(String),

    /// Measured powers are mutually inconsistent (e.g. pump-on exceeds pump-off).
    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),

    /// The ODE integrator produced a non-finite state.
    #[error("integration failure at z = {z_mm:.4} mm: {message}")]
    IntegrationFailure { z_mm: f64, message: String },

    /// Degenerate field geometry (e.g. intensity peak on the grid boundary).
    #[error("degenerate mode geometry: {0}")]
    DegenerateMode(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class for the CLI: 2 = configuration/validation,
    /// 3 = numerical failure, 4 = I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WavelengthOutOfRange { .. }
            | Error::InvalidArgument(_)
            | Error::Configuration(_)
            | Error::GridMismatch(_)
            | Error::ContractViolation(_)
            | Error::InconsistentMeasurement(_) => 2,
            Error::NumericalConvergence { .. }
            | Error::NoQpmSolution { .. }
            | Error::Bracketing(_)
            | Error::IntegrationFailure { .. }
            | Error::DegenerateMode(_) => 3,
            Error::Io(_) | Error::Serde(_) => 4,
        }
    }
}
