use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("point {0:?} lies outside the open unit disk")]
    OutsideUnitDisk(Vec<f64>),

    #[error("kernel value is not finite at {0:?} / {1:?} (zero distance without regularization?)")]
    NonFiniteKernel(Vec<f64>, Vec<f64>),

    #[error("custom table kernels are addressed by node index, not by coordinates")]
    TableNeedsIndex,

    #[error("invalid condenser: {0}")]
    InvalidCondenser(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("plate {plate}: a exceeds ⟨g,σ⟩ (slack {slack:.6e})")]
    Infeasible { plate: usize, slack: f64 },

    #[error("projection infeasible: a = {a} outside [0, {capacity}]")]
    ProjectionInfeasible { a: f64, capacity: f64 },

    #[error("Gram matrix is not positive definite (min eigenvalue {min_eigenvalue:.6e}, tolerance {pd_tol:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64, pd_tol: f64 },

    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("empty discretization: {0}")]
    EmptyDiscretization(String),
}
