use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected count {min_expected:.3} in bin {bin} is below {threshold}; increase m or use coarser bins")]
    UnderfilledBins { bin: usize, min_expected: f64, threshold: f64 },

    #[error("empty direction log")]
    EmptyLog,

    #[error("Fock truncation tail {tail:.3e} exceeds {limit:.0e}; increase the Fock dimension or shrink the phase-space box")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("phase-space box holds Husimi mass {mass:.12}, below the required {required}")]
    InsufficientBoxMass { mass: f64, required: f64 },

    #[error("canonical momentum {p:.9} entered the pole region; integrate in Cartesian form instead")]
    PoleProximity { p: f64 },

    #[error("time step {dt} exceeds the limit {limit} (spin period / 50)")]
    TimeStepTooLarge { dt: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
