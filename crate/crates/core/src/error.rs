use thiserror::Error;

pub type Result<T> = std::result::Result<T, DreError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DreError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular pivot in {context}: smallest |eigenvalue| {min_abs_eig:e}")]
    SingularPivot { context: String, min_abs_eig: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// `γ²I − BᵀPB` is not positive definite.
    #[error("Riccati pivot lost positive definiteness (smallest eigenvalue {margin:e})")]
    PivotLost { margin: f64 },

    /// The one-step DP supremum is `+∞`.
    #[error("dynamic programming value is unbounded (pivot smallest eigenvalue {margin:e})")]
    ValueExplosion { margin: f64 },

    #[error("domain violation in {stage}: margin {margin:e}")]
    DomainViolation { stage: String, margin: f64 },

    #[error("grid search maximizer hit the search box boundary on axis {axis}")]
    SearchBoxTooSmall { axis: usize },

    /// The inner block sum of a ⊛ product is not negative definite.
    #[error("star pivot for ({left_k}, {right_k}) is not negative definite (largest eigenvalue {max_eig:e})")]
    PivotIndefinite {
        left_k: usize,
        right_k: usize,
        max_eig: f64,
    },

    #[error("solution does not exist: representation pivot largest eigenvalue {max_eig:e}")]
    ExistenceViolated { max_eig: f64 },
}
