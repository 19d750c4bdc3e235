use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature rule needs at least one node")]
    EmptyQuadrature,

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("truncation order {order} exceeds the {nodes} available quadrature nodes")]
    TruncationTooLarge { order: usize, nodes: usize },

    #[error("{what} requires derivatives up to order {required}, only {available} available")]
    InsufficientDerivatives {
        what: &'static str,
        required: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "signal is not persistently exciting of order {order}: \
         min eigenvalue {min_eigenvalue:e} <= tolerance {tolerance:e}"
    )]
    NotPersistentlyExciting {
        order: usize,
        min_eigenvalue: f64,
        tolerance: f64,
    },

    #[error("data Gramian has rank {actual}, expected {expected}")]
    RankMismatch { expected: usize, actual: usize },

    #[error("rank deficient {what}: rank {rank} < {required}")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        required: usize,
    },

    #[error("Riccati integration diverged at t = {t}")]
    RiccatiBlowUp { t: f64 },

    #[error("linear solve failed: {0}")]
    Solve(String),
}
