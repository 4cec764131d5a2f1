use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{what} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("stage `{stage}` failed at eps = 1/{denominator}: {source}")]
    Stage {
        stage: String,
        denominator: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("setup stage `{stage}` failed: {source}")]
    Setup {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    Mismatch(String),

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed cell table: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a linear or eigen solver, possibly wrapped in a stage.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NoConvergence { .. } => true,
            Error::Stage { source, .. } | Error::Setup { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }

    /// True for bad input: config, parameters, coefficient checks.
    pub fn is_validation_failure(&self) -> bool {
        match self {
            Error::UnknownFamily(_)
            | Error::InvalidParameter(_)
            | Error::ConfigParse { .. }
            | Error::InvalidConfig(_)
            | Error::Validation(_) => true,
            Error::Stage { source, .. } | Error::Setup { source, .. } => source.is_validation_failure(),
            _ => false,
        }
    }
}
