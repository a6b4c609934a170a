//! Crate-wide error type.

use crate::grid::BranchTag;
use thiserror::Error;

/// Errors produced by grid construction, operator application, and the
/// variational machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: endpoints must be finite with a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("need at least 2 steps, got {n_steps}")]
    TooFewSteps { n_steps: usize },

    #[error("non-finite sample at node {node}, component {component}")]
    NonFiniteSample { node: usize, component: usize },

    #[error("non-finite value produced at node {node}, component {component}")]
    NonFiniteValue { node: usize, component: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("state tagged {found:?} not accepted: {message}")]
    WrongTag { found: BranchTag, message: String },

    #[error("no solver available for this Lagrangian family with these operators: {0}")]
    UnsupportedFamily(String),

    #[error("variation basis is empty for this space and grid")]
    EmptyBasis,

    #[error("supplied derivatives disagree with finite differences of the Lagrangian: {0}")]
    DerivativeMismatch(String),

    #[error("coefficient family is inconsistent: {0}")]
    BadFamily(String),

    #[error("basis not usable by this diagnostic: {0}")]
    UnsupportedBasis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
