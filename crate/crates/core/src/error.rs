use thiserror::Error;

use crate::symbol::SymbolCertificate;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("symbol file: {0}")]
    SymbolFile(String),

    #[error("axis index {axis} out of range for dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("certificate inconclusive ({reason}); refine the sphere grid")]
    InconclusiveCertificate {
        reason: String,
        certificate: Box<SymbolCertificate>,
    },

    #[error("no valid threshold found up to s = {s_scan_max}")]
    NoValidThreshold { s_scan_max: f64 },

    #[error("root solve did not converge for s = {s}: last bracket [{lo}, {hi}]")]
    NonConvergence { s: f64, lo: f64, hi: f64 },

    #[error("critical point search failed: {0}")]
    CriticalPoint(String),

    #[error("branch jump at s = {s}: angular step {step} exceeds {bound}")]
    BranchJump { s: f64, step: f64, bound: f64 },

    #[error("critical point lies outside its cap (distance {distance} > radius {radius})")]
    CapMisalignment { distance: f64, radius: f64 },

    #[error("quadrature budget exceeded: {required} nodes requested, cap {cap}")]
    BudgetExceeded { required: usize, cap: usize },

    #[error("unresolved oscillation: {0}")]
    UnresolvedOscillation(String),

    #[error("resolution failure: {0}")]
    Resolution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("endpoint pair (p, q) = ({p}, {q}) requires Hardy/BMO norms")]
    EndpointPair { p: f64, q: f64 },

    #[error("not enough samples: {got} (need {need})")]
    InsufficientSamples { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
