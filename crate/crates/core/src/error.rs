use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: residual {residual:e} exceeds tolerance {tolerance:e}")]
    InvalidHermitian { residual: f64, tolerance: f64 },

    #[error("degenerate boundary combination: c1 = c2 = 0")]
    DegenerateCombination,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimError { expected: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("potential sample {index} is not Hermitian (residual {residual})")]
    NonHermitianSample { index: usize, residual: f64 },

    #[error("potential grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },

    #[error("point x = {x} lies outside the potential's domain")]
    OutOfDomain { x: f64 },

    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("interval length {length} exceeds the certified regime ({detail})")]
    RegimeNotSatisfied { length: f64, detail: String },

    #[error("spectral parameter z = {z} is real")]
    RealSpectralParameter { z: Complex64 },

    #[error("truncation cap is near singular (condition number {condition:e})")]
    NearSingularCap { condition: f64 },

    #[error("m-function did not converge: last truncation b = {b}, last difference {delta:e}")]
    NotConverged { b: f64, delta: f64 },

    #[error("singular denominator in linear fractional transform (condition number {condition:e})")]
    SingularDenominator { condition: f64 },

    #[error("unsupported support: {0}")]
    UnsupportedSupport(String),

    #[error("linear term M(iη)/(iη) shows no Cauchy decay along the η schedule")]
    DivergentLinearTerm,

    #[error("ε-trail does not decay: {0}")]
    NonDecayingTrail(String),

    #[error("window too narrow: {0}")]
    WindowTooNarrow(String),

    #[error("measure estimate is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NegativeMass { min_eigenvalue: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
