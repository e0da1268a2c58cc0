//! Conserved-quantity-preserving integrators for Stratonovich SDEs.
//!
//! A supporting one-step scheme (Euler–Maruyama, Milstein, implicit midpoint,
//! strong Taylor 1.5/2, discrete gradient) is followed by a Newton projection
//! onto the level set of one or several invariants. The [`harness`] module
//! runs mean-square convergence and invariant-drift studies on the bundled
//! [`models`].

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod implicit;
pub mod linalg;
pub mod model;
pub mod models;
pub mod noise;
pub mod projection;
pub mod schemes;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, StateVec};
pub use model::{Invariant, SdeModel};
