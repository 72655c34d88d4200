use thiserror::Error;

/// Errors raised while validating inputs or running a solve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basket weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("invalid correlation matrix: {0}")]
    CorrelationMatrix(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    Convergence { sweeps: usize, off_norm: f64 },

    #[error("eigenvector column {column} is neither strictly positive nor of mixed sign")]
    AssumptionViolation { column: usize },

    #[error("zero pivot in tridiagonal factorisation at row {row}")]
    SingularMatrix { row: usize },

    #[error("comonotonic approximation needs nonnegative correlations, found rho[{i}][{j}] = {value}")]
    NegativeCorrelation { i: usize, j: usize, value: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
