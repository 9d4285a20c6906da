//! Numerical tools for the singular nonlocal problem
//! `(-Δ)^s u = λ (K(x) u^{-δ} + f(u))` on an interval with exterior zero data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod linalg;
pub mod linearization;
pub mod problem;
pub mod quadrature;
pub mod singular;
pub mod weights;

pub use error::{Error, Result};
pub use fracops::{assemble_operator, NonlocalOperator};
pub use grid::{build_grid, Grid};
pub use linalg::EigenPair;
pub use problem::{Nonlinearity, ProblemSpec};
pub use singular::{SolutionField, SolverOptions};
