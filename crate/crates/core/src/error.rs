use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {index})")]
    NotSpd { pivot: f64, index: usize },

    #[error("matrix is numerically singular (pivot column {index})")]
    Singular { index: usize },

    #[error("constraint matrix has rank {rank}, expected {expected}")]
    RankDeficientConstraints { rank: usize, expected: usize },

    #[error("hessian is not positive definite on the constraint null space")]
    NotSpdOnNullSpace,

    #[error("only {found} sites carry weight, basis needs {required}")]
    InsufficientSupport { found: usize, required: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("equality constraints cannot be met within the bounds (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("active-set solver hit the iteration cap ({iterations})")]
    MaxIterations { iterations: usize },

    #[error("support stencil of point {point:?} leaves the grid")]
    StencilOutsideDomain { point: Vec<f64> },

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
