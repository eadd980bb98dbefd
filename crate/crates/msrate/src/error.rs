use thiserror::Error;

/// Error type shared across the solver library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not positive semi-definite (lambda_min = {lambda_min:e})")]
    NotPsd { lambda_min: f64 },

    #[error("eigensolver failed to converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NumericalFailure { sweeps: usize, off: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sigma must be strictly positive, got {0}")]
    InvalidSigma(f64),

    #[error("failed to parse config: {0}")]
    ParseError(String),

    #[error("system is degenerate: stacked input matrix [B; sigma*B_bar] is rank-deficient")]
    Degenerate,

    #[error("trace of regularized operator is non-positive ({0:e}); iterate is corrupted")]
    DegenerateTrace(f64),

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("no stage of the continuation converged")]
    NoConvergedStage,

    #[error("energy is non-positive at step {step} ({energy:e}); cannot take logarithm")]
    NonPositiveEnergy { step: usize, energy: f64 },

    #[error("power iteration did not settle after {iters} iterations (last trace ratios {lo:e}..{hi:e})")]
    OracleNonConvergence { iters: usize, lo: f64, hi: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
