use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid metric spec `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },

    #[error("duplicate metric name `{0}`")]
    DuplicateMetric(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} for metric `{metric}`")]
    NonFinite { metric: String, value: f64 },

    #[error("value {value} outside [{min}, {max}] for metric `{metric}`")]
    OutOfRange {
        metric: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("record {record} is missing a score for metric `{metric}`")]
    MissingScore { record: String, metric: String },

    #[error("record {0} has no human score")]
    MissingHumanScore(String),

    #[error("record {0} has no reference and the config has no reference-free fallback")]
    NoFallback(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("objective undefined on this slice: {0}")]
    UndefinedObjective(String),

    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("Gram matrix is ill-conditioned (factorization failed with jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("invalid optimizer config: {0}")]
    InvalidOptimizer(String),

    #[error("every objective evaluation failed")]
    NoFeasibleEvaluation,

    #[error("record #{position} ({key}): {message}")]
    Record {
        position: usize,
        key: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl Error {
    /// Numeric failures (as opposed to bad input data).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::UndefinedCorrelation(_)
                | Error::UndefinedObjective(_)
                | Error::IllConditioned { .. }
                | Error::NoFeasibleEvaluation
        )
    }
}
