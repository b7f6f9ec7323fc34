//! IO, file formats, and command-line orchestration around
//! [`ewclab_core`].
//!
//! The core crate is pure computation; everything that touches the
//! filesystem lives here:
//!
//! - [`idx`]: the IDX image/label file format (MNIST's native layout).
//! - [`config`]: run options, the flat `key=value` config file, and the
//!   flag/file/default merge.
//! - [`csvio`]: the CSV schemas for accuracy matrices, correlation
//!   surfaces, and lambda tables.
//! - [`dump`]: the binary importance-map dump for offline analysis.
//! - [`svg`]: the dependency-free heatmap renderer.
//! - [`manifest`]: the per-run manifest (config echo, checksums,
//!   timings).
//! - [`runner`]: the `run` and `tune` pipelines behind the CLI.

pub mod config;
pub mod csvio;
pub mod dump;
pub mod idx;
pub mod manifest;
pub mod runner;
pub mod svg;

use std::fmt;

pub use config::{PartialOptions, RunOptions};
pub use idx::{load_idx, load_mnist_dir, IdxError};
pub use runner::{cmd_run, cmd_tune};

/// Top-level error, carrying the process exit code contract:
/// usage/config problems exit 1, data ingestion problems exit 2,
/// numerical divergence exits 3.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] IdxError),
    #[error("numerical divergence: {0}")]
    Divergence(ewclab_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Io { .. } => 1,
            AppError::Data(_) => 2,
            AppError::Divergence(_) => 3,
        }
    }

    pub fn io(context: impl fmt::Display, source: std::io::Error) -> Self {
        AppError::Io { context: context.to_string(), source }
    }
}

impl From<ewclab_core::Error> for AppError {
    fn from(err: ewclab_core::Error) -> Self {
        match err {
            ewclab_core::Error::NonFinite { .. } => AppError::Divergence(err),
            other => AppError::Usage(other.to_string()),
        }
    }
}
