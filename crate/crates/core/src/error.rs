use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("matrix is singular within tolerance (sigma_min = {sigma_min:e}, threshold = {threshold:e})")]
    Singular { sigma_min: f64, threshold: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("all rows are zero")]
    AllRowsZero,

    #[error("weight {index} is not positive: {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("{what} cap exceeded: {requested} > {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error(
        "system is not strictly feasible: nonnegative v with |A^T v| = {residual:e} (Gordan certificate)"
    )]
    NotStrictlyFeasible { certificate: Vec<f64>, residual: f64 },

    #[error("constraint system G z <= h is infeasible")]
    Infeasible,

    #[error("invalid tolerance {name} = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}
