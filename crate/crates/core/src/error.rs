use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("zero diagonal entry in row {row}: Jacobi preconditioner is singular")]
    SingularPreconditioner { row: usize },

    #[error("BICGSTAB breakdown after {iterations} iterations (restart already used)")]
    Breakdown { iterations: usize },

    #[error("SVD did not converge: {converged} of {requested} triples within the iteration cap")]
    SvdNotConverged { converged: usize, requested: usize },

    #[error("unsupported constraints for {method}: {reason}")]
    UnsupportedConstraints { method: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
