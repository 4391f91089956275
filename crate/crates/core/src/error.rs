use thiserror::Error;

use crate::clifford::Grading;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdfError {
    #[error("momentum |p| = {p} exceeds the cutoff {lambda}")]
    CutoffViolation { p: f64, lambda: f64 },

    #[error("grading undefined: element {index} of the word is {grading:?}")]
    GradingUndefined { index: usize, grading: Grading },

    #[error("fixed point did not converge within {iterations} iterations (last residual {last:e})")]
    Divergence { iterations: usize, last: f64, history: Vec<f64> },

    #[error("grid too coarse: {nodes} nodes, need at least {min}")]
    Resolution { nodes: usize, min: usize },

    #[error("quadrature failed: error estimate {estimate:e} above tolerance {tol:e}")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("order {0} not supported (maximum is 3)")]
    UnsupportedOrder(usize),

    #[error("rank compression discarded weight {discarded:e} (tolerance {tol:e}, rank cap {cap})")]
    CompressionLoss { discarded: f64, tol: f64, cap: usize },

    #[error("map is not contracting: ratios {ratios:?}")]
    NonContraction { ratios: Vec<f64> },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("operator is not Hermitian (defect {0:e})")]
    NonHermitian(f64),

    #[error("integral diverges for exponent a = {0} (need a > 1)")]
    DivergentIntegral(f64),

    #[error("basis is numerically linearly dependent (overlap condition number {0:e})")]
    Basis(f64),

    #[error("SCF did not converge in {iterations} iterations (last residual {last:e})")]
    ScfNotConverged { iterations: usize, last: f64, history: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, BdfError>;
