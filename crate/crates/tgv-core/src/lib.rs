//! Total generalized variation (TGV) of arbitrary order on periodic pixel
//! grids, without tensor-valued fields.
//!
//! TGV of order n decomposes an image into n derivative layers and charges
//! each layer's deviation from the derivative of the previous one. The
//! classical formulation stores symmetric tensor fields; here every layer is
//! a plain pixel-by-coefficient matrix, in one of two interchangeable shapes:
//!
//! * the *direct* shape keeps `2^k` columns per layer, constrained to the
//!   range of a symmetrizing column projector ([`operators::pi_project`]);
//! * the *compact* shape keeps `k + 1` columns per layer and reweights
//!   derivative stacks with a small orthonormal scaling matrix
//!   ([`operators::ScalingMatrix`]).
//!
//! Both shapes evaluate to the same regularizer value; [`eval`] exposes both
//! routes so they can be checked against each other, and [`solver`] performs
//! TGV-regularized restoration using the compact one.

pub mod combinatorics;
pub mod error;
pub mod eval;
pub mod grid;
pub mod norms;
pub mod operators;
pub mod parallel;
pub mod solver;

pub use error::{Result, TgvError};
