//! Causal and anti-causal evolution operators, asymmetric embeddings of
//! Lagrangian systems, and reversibility diagnostics on uniform time grids.
//!
//! The crate is organized around a single idea: keep the forward (past-
//! reading) and backward (future-reading) derivative operators distinct
//! instead of forcing one to be the formal adjoint of the other, and carry
//! that distinction through variational calculus. Functions live on a doubled
//! state whose two branches evolve under the two operators, Euler–Lagrange
//! residuals come in causal and anti-causal flavors, and whether the two
//! flavors agree on solutions is exactly the question of reversibility.
//!
//! Module map:
//! - [`grid`]: uniform grids, sampled functions, and the doubled state.
//! - [`operators`]: classical, shifted, and fractional operator pairs.
//! - [`embedding`]: lifting ordinary differential expressions to the doubled
//!   state through a selector that routes each branch to its own operator.
//! - [`lagrangian`]: Lagrangians, actions, and Euler–Lagrange residuals.
//! - [`variational`]: variation spaces, Gateaux differentials, extremal
//!   detection, and coherence checks between the two derivation paths.
//! - [`dynamics`]: causal oscillator solvers, composition identities, and the
//!   reversibility classifier.

pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod grid;
pub mod lagrangian;
pub mod operators;
mod util;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{AsymmetricState, BranchTag, GridFunction, TimeGrid};
pub use operators::{OperatorKind, OperatorPair};
pub use util::thread_cap;
