//! Recursive minimum-variance estimation of the initial state of a linear
//! system `x(k+1) = A_{k+1} x(k)` observed through `y(k) = H_k x(k) + v_k`,
//! together with observability and error-dynamics stability analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dd;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod observability;
pub mod stability;

pub use error::{Error, Result};
