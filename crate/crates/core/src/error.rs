use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("unsupported operator term: {0}")]
    UnsupportedTerm(String),

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spaces are incompatible: {0}")]
    IncompatibleSpaces(String),

    #[error("matrix is singular")]
    Singular,

    #[error("matrix is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("eigensolver did not converge")]
    EigenFailure,

    #[error(
        "nonlinear solver failed after {iterations} iterations (last residual {last_residual:.3e})"
    )]
    SolverFailure {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("operation requires a constant operator")]
    NonConstantOperator,

    #[error("system has no Casimir vector")]
    NoCasimir,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
