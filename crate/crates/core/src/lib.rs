//! Weighted nonlocal p-Laplacian energies for semi-supervised learning with
//! singular and degenerate weights.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::len_without_is_empty)]

pub mod coefficients;
pub mod convolution;
pub mod energies;
pub mod error;
pub mod funcspace;
pub mod geometry;
pub mod numerics;
pub mod quadrature;
pub mod solver;
pub mod transport;

pub use error::{Error, Result};
pub use numerics::Point;
