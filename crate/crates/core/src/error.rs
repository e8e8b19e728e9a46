use thiserror::Error;

/// Errors produced while building, assembling, solving or post-processing a
/// discretization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh configuration: {0}")]
    InvalidMesh(String),

    #[error("element index ({i}, {j}) out of range for N = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("quadrature with {got} points per direction is too coarse, need at least {min}")]
    QuadratureTooCoarse { got: usize, min: usize },

    #[error("singular local system in {0}")]
    SingularLocalSystem(&'static str),

    #[error("coefficient condition violated: {0}")]
    CoefficientCondition(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("invalid convergence data: {0}")]
    RateInput(String),

    #[error("invalid study configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
