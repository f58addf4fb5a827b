//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or missing input data, files, or configuration (exit 2).
    Data,
    /// Numeric failure: singular systems, divergence, degenerate samples (exit 3).
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("empty dataset: {0}")]
    EmptyData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design matrix is singular: column '{column}' is linearly dependent on earlier columns")]
    Singular { column: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::File { .. }
            | Error::Parse { .. }
            | Error::DuplicateColumn(_)
            | Error::MissingColumn(_)
            | Error::EmptyData(_)
            | Error::Shape(_)
            | Error::InvalidConfig(_) => ErrorClass::Data,
            Error::Singular { .. }
            | Error::Divergence { .. }
            | Error::InsufficientSamples { .. }
            | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}
