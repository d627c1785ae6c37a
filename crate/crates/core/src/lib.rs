//! Dual augmented Lagrangian solver for linear and least-squares
//! semidefinite programs.
//!
//! The outer loop ([`alm`]) minimizes the dual augmented Lagrangian with a
//! projected semismooth Newton-CG inner solver ([`inner`]) and supports
//! several inexact stopping-criteria regimes for the subproblems, including
//! implementable ones that certify the subproblem gap from a strictly
//! feasible primal point. The [`diagnostics`] module measures empirical
//! Q-linear/superlinear convergence rates against the predicted bounds and
//! ships distance oracles for the built-in fixture problems.
//!
//! Modules:
//! - [`symcone`] — symmetric-matrix kernel: eigendecomposition, PSD
//!   projection and its generalized derivative, pseudo-inverse.
//! - [`model`] — problem data, constraint operators, KKT residuals,
//!   feasibility-bound constants.
//! - [`inner`] — projected semismooth Newton-CG subproblem solver.
//! - [`alm`] — outer loop with penalty scheduling and stopping criteria.
//! - [`diagnostics`] — proximal-point harness, Fejér checks, rate reports,
//!   rank/complementarity checks, fixture distance oracles.
//! - [`fixtures`] — small built-in problem instances used by demos and
//!   tests.

// negated comparisons like `!(c > 0.0)` are NaN-rejecting guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alm;
pub mod diagnostics;
pub mod fixtures;
pub mod inner;
pub mod model;
pub mod symcone;

mod error;

pub use error::{Error, Result};
