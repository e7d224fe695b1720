use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field mean {mean:e} exceeds tolerance {tolerance:e}; operation needs mean-zero data")]
    NonZeroMean { mean: f64, tolerance: f64 },

    #[error("length mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wavenumber band [{k_min}, {k_max}] is outside the resolved range 1..={limit}")]
    BandOutOfRange { k_min: f64, k_max: f64, limit: f64 },

    #[error("fit window holds {found} samples, at least {needed} are required")]
    WindowTooShort { found: usize, needed: usize },

    #[error("half-norm threshold not reached within horizon {horizon}")]
    NotReached { horizon: f64 },

    #[error("missing diagnostics: {0}")]
    MissingDiagnostics(String),

    #[error("constant {name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input (configs, flags, files)
    /// rather than by a failure while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGrid(_)
                | Error::InvalidParameter(_)
                | Error::BandOutOfRange { .. }
                | Error::NonPositiveConstant { .. }
                | Error::Format(_)
        )
    }
}
