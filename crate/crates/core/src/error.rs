use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-positive volume element at node {node}: {value}")]
    NonPositiveVolume { node: usize, value: f64 },
    #[error("matrix not positive definite at node {node} (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },
    #[error("singular tensor at node {node}: determinant {determinant}")]
    Singular { node: usize, determinant: f64 },
    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tensor is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("solver did not converge after {iterations} iterations (relative residual {residual})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("codomain metric cannot be evaluated: {0}")]
    Codomain(String),
    #[error(transparent)]
    Parse(#[from] crate::expr::ParseError),
    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
    #[error("configuration error: {0}")]
    Config(String),
}
