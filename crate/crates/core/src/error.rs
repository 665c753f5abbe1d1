use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum HdgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("local condensation failed on element {element}: {reason}")]
    Condensation { element: usize, reason: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("global solve failed: {0}")]
    Solver(String),

    #[error("Newton iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("HDG projection is singular for this stabilization (theta determinant {determinant}): {detail}")]
    ProjectionSingular { determinant: f64, detail: String },

    #[error("unstable stabilization: violated {0:?}")]
    Unstable(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HdgError>;
