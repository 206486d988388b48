use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs that cannot be turned into a design (missing parameters, bad parity, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The continuous specification does not fit the chosen DFT grid.
    #[error("infeasible specification: {0}")]
    Infeasible(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{what} {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorisation broke down.
    #[error("matrix not positive definite (pivot {pivot} at row {row}, condition estimate {condition:.3e})")]
    Conditioning {
        row: usize,
        pivot: f64,
        condition: f64,
    },

    /// Malformed external input (spectra, streams, schedules, artifacts).
    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
