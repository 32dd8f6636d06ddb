use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: field lives on n={found_n}, L={found_l} but operation expects n={expected_n}, L={expected_l}")]
    GridMismatch {
        expected_n: usize,
        expected_l: f64,
        found_n: usize,
        found_l: f64,
    },

    #[error("soliton tail sech(eta*L) = {tail:e} exceeds {tolerance:e}; widen the grid")]
    TailTruncation { tail: f64, tolerance: f64 },

    #[error("filter parameter {value} is not below the grid Nyquist wavenumber {nyquist}")]
    AboveNyquist { value: f64, nyquist: f64 },

    #[error("field is not in the range of the noise operator: discarded energy fraction {fraction:e} > {tolerance:e}")]
    NotInRange { fraction: f64, tolerance: f64 },

    #[error("non-finite state at t = {time}; set a blow-up threshold to track explosions")]
    NonFinite { time: f64 },

    #[error("mass drift {drift:e} at t = {time} exceeds the monitor limit; reduce dt")]
    MassDrift { drift: f64, time: f64 },

    #[error("boundary value problem did not converge: {detail}")]
    NoConvergence { detail: String, residual_history: Vec<f64> },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::GridMismatch { .. } => "grid-mismatch",
            Error::TailTruncation { .. } => "tail-truncation",
            Error::AboveNyquist { .. } => "above-nyquist",
            Error::NotInRange { .. } => "not-in-range",
            Error::NonFinite { .. } => "non-finite",
            Error::MassDrift { .. } => "mass-drift",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Hypothesis(_) => "hypothesis",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
