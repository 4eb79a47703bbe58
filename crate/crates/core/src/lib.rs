//! Weighted Hankel structured low-rank approximation of time series.
//!
//! A series of rank `r` satisfies a generalized linear recurrence relation
//! (GLRR) `a^T T_{r+1}(S) = 0`. The solvers search over GLRR coefficients and
//! project the observations onto the space of series annihilated by them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod bench;
pub mod error;
pub mod horner;
pub mod lstsq;
pub mod nullspace;
pub mod param;
pub mod projection;
pub mod series;
pub mod solvers;
pub mod svd;
pub mod weights;

pub use error::{Error, Result};
