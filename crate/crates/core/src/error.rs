use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported Hilbert-space dimension {0} (expected 2 or 4)")]
    UnsupportedDimension(usize),

    #[error("matrix is not Hermitian: max |A - A^dagger| = {residual:e}")]
    NotHermitian { residual: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid frequency specification: {0}")]
    InvalidSpec(String),

    #[error("distribution is not normalized: integral = {total}")]
    NotNormalized { total: f64 },

    #[error("expected a {expected} distribution")]
    WrongArity { expected: &'static str },

    #[error("dynamical map is singular at t = {t}: |det| = {det:e}")]
    SingularMap { t: f64, det: f64 },

    #[error("rate matrix has weight {weight:e} outside the dephasing subspace")]
    Structure { weight: f64 },

    #[error("t = {t} lies within the exclusion window of the rate pole at t = {pole}")]
    PoleProximity { t: f64, pole: f64 },

    #[error("decoherence function {which} vanishes at t = {t}; logarithmic derivative undefined")]
    LogDerivative { t: f64, which: &'static str },

    #[error("B+ weight {which} = {value:e} is degenerate")]
    DegenerateWeight { which: &'static str, value: f64 },

    #[error("environment grid under-resolved: kernel trace = {trace}")]
    GridResolution { trace: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("quadrature did not converge on [{a}, {b}]: error estimate {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
