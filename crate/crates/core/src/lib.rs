//! Random projections for standard-form linear programs.
//!
//! A constraint system `Ax = b` with `m` rows is compressed to `TAx = Tb` with
//! `k ≪ m` rows by a sub-gaussian random matrix `T`. The crate samples projectors,
//! builds and solves the projected LP with a dense simplex solver, lifts the projected
//! dual back to the original problem to retrieve an approximate solution, and ships the
//! random-instance generators and benchmark harness used to check how well feasibility
//! and optimality survive the projection. The [`ecc`] module applies the same machinery
//! to ℓ₁ decoding of a real-valued error-correcting code.

// Index loops mirror the linear algebra; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ecc;
pub mod error;
pub mod genbench;
pub mod linalg;
pub mod lp_model;
pub mod project;
pub mod retrieve;
pub mod seed;
pub mod sketch;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use lp_model::{NormalizedLp, QualityMetrics, StandardFormLp};
pub use sketch::{Projector, ProjectorKind};
pub use solver::{SolveResult, Status};
