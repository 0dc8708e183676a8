//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis construction failed: {0}")]
    EmptyBasis(String),
    #[error("mode index {index} out of range for basis with {num_modes} modes")]
    ModeIndex { index: usize, num_modes: usize },
    #[error("operation requires a 3-level ancilla but the basis has none")]
    MissingAncilla,
    #[error("operator dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hamiltonian is not Hermitian (max |H - H\u{2020}| = {deviation:.3e})")]
    NonHermitian { deviation: f64 },
    #[error("integrator step size underflow at t = {time:.6e}")]
    StepSizeUnderflow { time: f64 },
    #[error("unknown parameter preset '{0}'")]
    UnknownPreset(String),
    #[error("missing mode role assignment: {0}")]
    MissingRole(String),
    #[error("channel is not trace-non-increasing (max input trace gain {0:.3e})")]
    TraceIncreasing(f64),
    #[error("pulse design failure: state-transfer boundary residual {residual:.3e} exceeds 0.05")]
    PulseBoundary { residual: f64 },
    #[error("waveform is undersampled: dt = {dt:.3e} us exceeds Nyquist limit {limit:.3e} us")]
    Undersampled { dt: f64, limit: f64 },
    #[error("circuit size n = {0} unsupported: {1}")]
    CircuitSize(u32, String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
