use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state {index} is not normalized (norm² = {norm_sqr})")]
    NotNormalized { index: usize, norm_sqr: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("states are linearly dependent (smallest Gram eigenvalue {min_eigenvalue:.3e}); no unambiguous discrimination exists")]
    LinearlyDependent { min_eigenvalue: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("Gram matrices differ at ({i}, {j}) by {deviation:.3e}; no unitary maps inputs to outputs")]
    GramMismatch { i: usize, j: usize, deviation: f64 },

    #[error("matrix is not unitary (max |U†U - I| = {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("orthocomplement for state {index} has dimension {dimension}, expected 1")]
    DegenerateComplement { index: usize, dimension: usize },

    #[error("outcome rails are not a partition of the output rails: {0}")]
    InvalidOutcomeRails(String),

    #[error("inconsistent measurement: {0}")]
    Inconsistent(String),
}
