use thiserror::Error;

use crate::lattice::LatticeIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: window holds {expected} sites, array has {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("index {index} lies outside the window")]
    OutOfWindow { index: LatticeIndex },

    #[error("atom {key} lies outside the sampled margin [{lo}, {hi}]")]
    OutOfMargin { key: LatticeIndex, lo: LatticeIndex, hi: LatticeIndex },

    #[error("combination support {size} exceeds the cap of {cap} terms")]
    SupportOverflow { size: usize, cap: usize },

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite input value {0}")]
    NonFinite(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("exact law enumeration needs {outcomes} outcomes (cap {cap}); enable Monte Carlo fallback")]
    ExactLawTooLarge { outcomes: f64, cap: usize },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
