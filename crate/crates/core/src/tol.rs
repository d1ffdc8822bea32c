//! Numerical tolerances shared across the crate.

/// Row sums and distribution normalization.
pub const TOL_STOCH: f64 = 1e-12;
/// Residuals of dense linear solves.
pub const TOL_SOLVE: f64 = 1e-10;
/// Eigenvalues of projected variance-form differences.
pub const TOL_PSD: f64 = 1e-9;
/// Entry and commute-time gaps in leaf-peeling certificates.
pub const TOL_CERT: f64 = 1e-8;
