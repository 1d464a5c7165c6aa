use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Bessel K argument outside the right half plane: {0}")]
    BesselDomain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("numerical instability: {0}")]
    Unstable(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PatError>;
