use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonNonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("simulation diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("malformed data in {path}: line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("missing data file {0}")]
    MissingData(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NewtonNonConvergence { .. } => "newton-non-convergence",
            Error::Divergence { .. } => "divergence",
            Error::Solver(_) => "solver",
            Error::Parse { .. } => "parse",
            Error::MissingData(_) => "missing-data",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
        }
    }

    /// Process exit code associated with [`Error::category`].
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 2,
            Error::Config(_) => 3,
            Error::MissingData(_) | Error::Io { .. } | Error::Parse { .. } => 4,
            Error::NewtonNonConvergence { .. } | Error::Divergence { .. } => 5,
            Error::Solver(_) => 6,
        }
    }
}

pub(crate) fn ensure_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
