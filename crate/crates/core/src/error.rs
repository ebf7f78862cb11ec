use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the exit code the CLI maps them to: input and
/// usage problems (2), numeric or degenerate data (3), and I/O (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error in field `{field}`: {detail}")]
    Format { field: String, detail: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty cloud: count={count}, dim={dim}")]
    EmptyCloud { count: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("log-domain accumulation is only defined for the power branch (exponent {exponent}, dim {dim})")]
    UnsupportedMode { exponent: i32, dim: usize },

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    #[error("no source carries metric `{metric}` for target `{target}`")]
    EmptyRanking { target: String, metric: String },

    #[error("s-range 3..=ceil(n/10) is empty for n = {dim} (need n >= 30)")]
    RangeEmpty { dim: usize },

    #[error("kernel overflow at exponent magnitude {exponent_magnitude}")]
    Overflow { exponent_magnitude: u32 },

    #[error("kernel sum underflowed to zero at exponent magnitude {exponent_magnitude}; use a smaller |2m - n|")]
    Underflow { exponent_magnitude: u32 },

    #[error("degenerate target: sigma_q = {sigma_q}")]
    DegenerateTarget { sigma_q: f64 },

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue} below tolerance {tolerance}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 input/usage, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::Overflow { .. }
            | Error::Underflow { .. }
            | Error::DegenerateTarget { .. }
            | Error::NoConvergence { .. }
            | Error::NotPsd { .. }
            | Error::Decomposition(_) => 3,
            _ => 2,
        }
    }
}
