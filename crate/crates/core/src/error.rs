use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-probability instance (projected trace {0:e})")]
    ZeroProbabilityInstance(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("numeric failure at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    /// True for failures that originate in the numerics rather than in
    /// caller input or the filesystem.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_)
                | Error::AtIteration { .. }
                | Error::ZeroProbabilityInstance(_)
                | Error::InvalidState(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}
