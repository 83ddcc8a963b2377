use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("root location: {0}")]
    RootLocation(String),

    #[error("precision insufficient: {0}")]
    PrecisionInsufficient(String),

    #[error("ambiguous numerical rank: pivot ratio {ratio:.3e} is within two decades of tolerance {tol:.3e}")]
    AmbiguousRank { ratio: f64, tol: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver did not converge at step {step} after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("structure: {0}")]
    Structure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
