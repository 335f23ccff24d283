use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("invalid dimensions: {0}")]
    BadDims(String),

    #[error("mixture needs at least two components")]
    TooFewComponents,

    #[error("{k} components cannot be packed as a simplex in dimension {n}")]
    TooManyComponents { k: usize, n: usize },

    #[error("separation must be positive, got {0}")]
    BadSeparation(f64),

    #[error("invalid mixture specification: {0}")]
    BadSpec(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("random draw degenerated during orthonormalization")]
    DegenerateDraw,

    #[error("need at least {needed} data points, have {have}")]
    NotEnoughData { needed: usize, have: usize },

    #[error("initial centers coincide; cannot set an initial variance")]
    DuplicatePoints,

    #[error("component {0} lost all responsibility mass")]
    EmptyComponent(usize),

    #[error("EM failed at iteration {iteration}: {source}")]
    EmFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class {class} has {count} points, need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("packing constraints unsatisfied after repair (worst violation {0:e})")]
    PackingFailed(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line} has {found} features, expected {expected}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Strips [`Error::EmFailed`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::EmFailed { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
