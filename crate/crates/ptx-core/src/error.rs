//! Crate-wide error type. Every fallible public function returns [`Result`].

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix (or Gram matrix) does not have the rank the operation needs.
    #[error("rank deficient input: {0}")]
    RankDeficient(String),

    /// Two operands that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A subspace operation needs room in the orthogonal complement (k < d).
    #[error("subspace fills the ambient space; no orthogonal complement (d = k = {0})")]
    NoComplement(usize),

    /// Structural parameters (d, k, t, n, ...) out of range.
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    /// Perturbation level must satisfy 0 <= gamma <= 1.
    #[error("invalid perturbation level gamma = {0}; must lie in [0, 1]")]
    InvalidGamma(f64),

    /// Requested subspace rank is out of range for the data at hand.
    #[error("invalid subspace rank: {0}")]
    InvalidK(String),

    /// The tracing attack needs at least two subspace coordinates.
    #[error("attack needs k >= 2 subspace coordinates, got {0}")]
    KTooSmall(usize),

    /// Prior scale must satisfy 0 < rho <= 1.
    #[error("invalid prior norm rho = {0}; must lie in (0, 1]")]
    InvalidRho(f64),

    /// The private phase received no rows.
    #[error("private dataset is empty")]
    EmptyPrivate,

    /// A file or stream contained nothing usable.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Renyi orders must be > 1.
    #[error("invalid Renyi order {0}; orders must exceed 1")]
    InvalidOrder(f64),

    /// An RDP curve with no points cannot be converted or minimized.
    #[error("empty RDP curve")]
    EmptyCurve,

    /// Noise calibration cannot reach the requested budget within bounds.
    #[error("privacy target unachievable: {0}")]
    Unachievable(String),

    /// A dataset or sample batch is empty where data is required.
    #[error("empty dataset: {0}")]
    EmptyData(String),

    /// Caller-supplied arguments violate a documented precondition.
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),

    /// A CSV row failed to parse or had inconsistent width.
    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    /// Experiment configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
