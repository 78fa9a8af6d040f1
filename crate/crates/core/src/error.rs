use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed stroke: {0}")]
    MalformedStroke(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("survey validation failed: {0}")]
    Validation(String),

    #[error("unknown question `{0}`")]
    UnknownQuestion(String),

    #[error("cannot aggregate an empty set of intervals")]
    EmptyAggregate,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("F statistic undefined: effect and error sums of squares are both zero")]
    UndefinedF,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("fixed-effect design is rank deficient")]
    RankDeficient,

    #[error("REML fit did not converge after {iterations} iterations (best log-likelihood {best_loglik})")]
    NotConverged {
        iterations: usize,
        best_loglik: f64,
        best_log_sigmas: [f64; 3],
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
