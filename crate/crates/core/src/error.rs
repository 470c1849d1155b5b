use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("block extent {extent} exceeds the 2-byte local index limit of {limit}")]
    BlockTooLarge { extent: usize, limit: usize },

    #[error("entry ({row}, {col}) lies outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("stored entry ({row}, {col}) is not strictly below the diagonal")]
    NotStrictlyLower { row: usize, col: usize },

    #[error("diagonal tile [{start}, {end}) straddles a block boundary")]
    MisalignedTiles { start: usize, end: usize },

    #[error("projected tridiagonal system is singular (pivot {pivot:e})")]
    SingularProjection { pivot: f64 },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("triangular factor is numerically singular")]
    SingularTriangular,

    #[error("block of vectors is rank deficient")]
    RankDeficient,

    #[error("Rayleigh-Ritz basis is degenerate: {0}")]
    BasisDegenerate(String),

    #[error("basis repair failed twice in a row at iteration {iteration}")]
    BreakdownUnrecoverable { iteration: usize },

    #[error("partition count n_d = {0} must be odd and positive")]
    EvenNd(usize),

    #[error("collective on group {group:?} did not complete: rank {missing} never contributed")]
    ProtocolDeadlock { group: Vec<usize>, missing: usize },

    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("matrix market header is not 'coordinate real symmetric': {0}")]
    NotSymmetricHeader(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
