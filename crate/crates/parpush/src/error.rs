//! Crate-wide error type. Every mathematical failure mode has its own
//! variant so callers (and the CLI exit-code mapping) can tell data
//! errors apart from genuine obstructions.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unknown point: {0}")]
    UnknownPoint(String),
    #[error("non-integral genus: {0}")]
    NonIntegralGenus(String),
    #[error("invalid covering: {0}")]
    InvalidCovering(String),
    #[error("flag over unmarked point: {0}")]
    FlagOverUnmarkedPoint(String),
    #[error("misaligned residues: {0}")]
    MisalignedResidues(String),
    #[error("merge conflict: {0}")]
    MergeConflict(String),
    #[error("no consistent assignment: {0}")]
    NoConsistentAssignment(String),
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("not torus preserving: {0}")]
    NotTorusPreserving(String),
    #[error("precision loss: {0}")]
    PrecisionLoss(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// The stable error name used in CLI output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DivisionByZero => "DivisionByZero",
            Error::OutOfRange(_) => "OutOfRange",
            Error::UnknownPoint(_) => "UnknownPoint",
            Error::NonIntegralGenus(_) => "NonIntegralGenus",
            Error::InvalidCovering(_) => "InvalidCovering",
            Error::FlagOverUnmarkedPoint(_) => "FlagOverUnmarkedPoint",
            Error::MisalignedResidues(_) => "MisalignedResidues",
            Error::MergeConflict(_) => "MergeConflict",
            Error::NoConsistentAssignment(_) => "NoConsistentAssignment",
            Error::RankMismatch(_) => "RankMismatch",
            Error::NotTorusPreserving(_) => "NotTorusPreserving",
            Error::PrecisionLoss(_) => "PrecisionLoss",
            Error::Parse(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
