use std::io;

use thiserror::Error;

/// Errors raised anywhere in the synthesis / analysis / estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported wavelet order {0} (supported: 1..=10)")]
    UnsupportedOrder(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("circulant embedding has a negative eigenvalue {min:e} (max {max:e})")]
    EmbeddingNotNonnegative { min: f64, max: f64 },

    #[error("log-variance {0} is not finite (zero coefficient variance)")]
    NonFiniteLogVariance(f64),

    #[error("design matrix is rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("weight matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("normal equations are singular")]
    Singular,

    #[error("covariance model is degenerate: {0}")]
    ModelDegenerate(String),

    #[error("need at least 2 replicates, got {0}")]
    InsufficientReplicates(usize),

    #[error("{failed} of {total} replicates failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("field file format error: {0}")]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Failures when decoding an `FBS1` field file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("dimension overflow: lattice size does not fit in memory")]
    DimensionOverflow,

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),
}

impl Error {
    /// True for errors that come from numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmbeddingNotNonnegative { .. }
                | Error::NonFiniteLogVariance(_)
                | Error::RankDeficient { .. }
                | Error::NotPositiveDefinite
                | Error::Singular
                | Error::ModelDegenerate(_)
                | Error::TooManyFailures { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
