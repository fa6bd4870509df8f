use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or indices that do not line up (dimension mismatch, outcome out of range).
    #[error("structural error: {0}")]
    Structural(String),
    /// Values outside the domain of an operation (non-positive weight, bad probability).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed (root not bracketed, NaN in the weights).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Invalid experiment or scenario configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
