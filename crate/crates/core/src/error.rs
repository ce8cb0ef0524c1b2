use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("system of {n_sites} sites exceeds the dense cap of {cap}")]
    OverDenseCap { n_sites: usize, cap: usize },

    #[error("site index {index} out of range 1..={n_sites}")]
    SiteOutOfRange { index: usize, n_sites: usize },

    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("solution at lambda = {lambda} is not converged")]
    Unconverged { lambda: f64 },

    #[error("inconsistent susceptibility triple: {0}")]
    InconsistentTriple(String),

    #[error("fit rejected: {0}")]
    Fit(#[from] FitError),

    #[error("fit window too short: {len} monotone points, need at least {min}")]
    WindowTooShort { len: usize, min: usize },

    #[error("config: {0}")]
    ConfigParse(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config { field: field.to_string(), message: message.into() }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), message: err.to_string() }
    }

    /// Bad input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::ConfigParse(_) | Error::Config { .. } | Error::Checkpoint(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("non-positive ordinate {value} at abscissa {abscissa}")]
    NonPositive { abscissa: f64, value: f64 },

    #[error("abscissae are all equal")]
    DegenerateAbscissae,

    #[error("ordinates grow with the abscissa (slope {slope:e})")]
    NotDecaying { slope: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
