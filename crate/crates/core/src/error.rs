use thiserror::Error;

/// Errors raised by the optimization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("degenerate effective channel (Frobenius norm {0:.3e})")]
    DegenerateChannel(f64),

    #[error("analog precoder is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("digital precoder carries zero power")]
    ZeroPower,

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("solver diverged after {iterations} iterations")]
    Diverged { iterations: usize },

    #[error("unsupported problem structure: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dims(r: usize, c: usize) -> String {
    format!("{r}x{c}")
}
