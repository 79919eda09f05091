//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A cell with zero devices cannot yield empirical proportions.
    #[error("empty cell: all counts are zero")]
    EmptyCell,

    /// No cell in the dataset carries the requested stress level.
    #[error("unknown stress level {0}")]
    UnknownStress(f64),

    /// The design cannot identify the requested parameters.
    #[error("identification error: {0}")]
    Identification(String),

    /// The dataset violates a structural invariant.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// A data or scenario file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A required cell is absent from the dataset.
    #[error("missing cell: {0}")]
    MissingCell(String),

    /// An invalid simulation scenario.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
