use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("right-hand side is the zero vector")]
    ZeroRhs,
    #[error("column {0} of the constraint matrix is zero")]
    ZeroColumn(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("sparsity q must lie in (0, 1/2], got {0}")]
    BadSparsity(f64),
    #[error("bad projector dimensions: {0}")]
    BadDimension(String),
    #[error("target is not in the cone spanned by the columns")]
    NotInCone,
    #[error("projected problem is infeasible")]
    InfeasibleProjection,
    #[error("projected problem is unbounded")]
    UnboundedProjection,
    #[error("degenerate instance after {0} resamples: zero row or column")]
    DegenerateInstance(usize),
    #[error("character {0:?} is not 7-bit ASCII")]
    NonAscii(char),
    #[error("bad bit-string length: {0}")]
    BadLength(String),
    #[error("encoding matrix is rank deficient after {0} attempts")]
    RankFailure(usize),
    #[error("decoding solve failed: {0}")]
    SolveFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
