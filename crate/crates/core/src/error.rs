use thiserror::Error;

/// Errors raised by the design, analysis and recovery routines.
#[derive(Debug, Error, Clone)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("lifted vector is not rank one (second singular value {second_singular_value:e}, first {first_singular_value:e})")]
    NotRankOne {
        first_singular_value: f64,
        second_singular_value: f64,
    },

    #[error("largest eigenvalue is not simple: {largest:e} vs {second:e}")]
    EigenvalueTie { largest: f64, second: f64 },

    #[error("cannot allocate power: all top-{0} eigenvalues are zero")]
    NoActiveModes(usize),

    #[error("design collapsed to the all-zero matrix")]
    DesignCollapsed,

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("too few samples: need at least {required}, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::sync::Arc<std::io::Error>,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source: std::sync::Arc::new(source),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl PartialEq for Error {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Error::Io { context: a, source: x }, Error::Io { context: b, source: y }) => {
                a == b && x.kind() == y.kind()
            }
            (Error::Io { .. }, _) | (_, Error::Io { .. }) => false,
            _ => self.to_string() == other.to_string(),
        }
    }
}
