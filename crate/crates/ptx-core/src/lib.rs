//! Two-phase transfer learning for linear regression with a shared low-dimensional
//! structure, plus the tooling needed to study it end to end.
//!
//! The setting: many regression tasks share an unknown k-dimensional subspace of
//! R^d. Plentiful public data from the source tasks is used to estimate that
//! subspace by a method of moments, and a small private dataset from a new task
//! is then fit inside the estimated subspace under differential privacy. Working
//! in k dimensions instead of d shrinks both the sample cost and the privacy
//! cost of the final regression.
//!
//! Module map:
//!
//! - [`linalg`]: orthonormal bases, projectors, principal angles.
//! - [`model`]: the synthetic data model and risk functionals.
//! - [`mom`]: moment-based subspace recovery from pooled public data.
//! - [`accountant`]: Renyi-DP accounting for subsampled Gaussian mechanisms.
//! - [`dpsgd`]: clipped-gradient DP-SGD and ordinary least squares.
//! - [`two_phase`]: the public-then-private pipeline glued together.
//! - [`attack`]: a tracing (membership) attack for auditing private regressors.
//! - [`experiment`]: reproducible experiment grids behind the `ptx` CLI.

pub mod accountant;
pub mod attack;
pub mod dpsgd;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod mom;
pub mod seed;
pub mod tol;
pub mod two_phase;

pub mod book;

/// Runs the README's example as a doc-test without publishing it in the docs.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub struct ReadmeDoctests;

pub use error::{Error, Result};
