//! Quantum estimation with symmetric logarithmic derivatives and Uhlmann
//! parallel transport on finite-dimensional, strictly positive state models.

// Tolerance checks are written as `!(x <= tol)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod geometry;
pub mod matcore;
pub mod model;
pub mod transport;

pub use error::{Error, ErrorKind, Result};
