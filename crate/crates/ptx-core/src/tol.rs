//! Numeric tolerances used across the crate, collected in one place so tests
//! and production checks agree on what "orthonormal" or "negligible" means.

/// Max allowed entry of |Q^T Q - I| for a matrix accepted as an orthonormal basis.
pub const ORTHONORMALITY: f64 = 1e-10;

/// Relative singular-value cutoff below which a column set counts as rank deficient.
pub const RANK_RATIO: f64 = 1e-12;

/// Agreement required between a perturbed basis and its requested principal angle.
pub const PERTURBATION: f64 = 1e-8;

/// Noise-free DP-SGD run to convergence must match OLS to this l2 distance.
pub const SGD_OLS_AGREEMENT: f64 = 1e-4;

/// Width of the acceptance window below a target epsilon during noise calibration.
pub const CALIBRATION_WINDOW: f64 = 1e-4;

/// Exactness tolerance for closed-form accountant identities (q = 1 Gaussian).
pub const ACCOUNTANT_EXACT: f64 = 1e-12;

/// Sampling rates closer to 1 than this are treated as the unsubsampled mechanism.
pub const FULL_BATCH_Q: f64 = 1e-12;

/// Singular values of cross-Gram matrices are clamped into [0, 1] within this slack
/// before computing principal angles; larger excursions indicate a non-orthonormal input.
pub const SINGULAR_VALUE_CLAMP: f64 = 1e-8;
