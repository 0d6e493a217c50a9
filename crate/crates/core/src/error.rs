use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element {element} is degenerate or inverted (det = {det:e})")]
    DegenerateElement { element: usize, det: f64 },

    #[error("face {face} of element {element} is degenerate (Gram determinant = {det:e})")]
    DegenerateFace {
        element: usize,
        face: usize,
        det: f64,
    },

    #[error("face with nodes {nodes:?} is shared by more than two elements")]
    NonManifold { nodes: Vec<usize> },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("loaded area is not positive ({area:e})")]
    ZeroArea { area: f64 },

    #[error("stiffness matrix is singular (pivot {pivot:e} at dof {dof})")]
    SingularSystem { dof: usize, pivot: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no bracket for scalar inversion at argument {value:e}")]
    NoBracket { value: f64 },

    #[error("scalar inversion did not converge at argument {value:e}")]
    NonConvergence { value: f64 },

    #[error("node {node} has no adjacent surface face")]
    IsolatedNode { node: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
