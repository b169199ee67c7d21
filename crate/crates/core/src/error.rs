use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("empty vector or matrix")]
    Empty,

    #[error("vector is (numerically) zero")]
    ZeroResidual,

    #[error("A v vanishes for a nonzero v")]
    SingularDirection,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not skew-symmetric (max defect {0:e})")]
    NotSkewSymmetric(f64),

    #[error("matrix is singular")]
    Singular,

    #[error("A has a zero eigenvalue")]
    ZeroEigenvalue,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pair indices must differ")]
    SamePair,

    #[error("sign condition violated: {0}")]
    SignConditionViolated(String),

    #[error("epsilon {eps} does not give an eigenvector for this map (required eps^2 = {required})")]
    InadmissibleEpsilon { eps: f64, required: f64 },

    #[error("breakdown: intermediate residual vanished")]
    Breakdown,

    #[error("matrix is neither symmetric nor of the form I - (skew-symmetric)")]
    UnsupportedStructure,

    #[error("matrix must be diagonal for exact spectral quantities")]
    NotDiagonal,

    #[error("value overflows f64")]
    Overflow,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown builtin matrix `{0}`")]
    UnknownMatrix(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
