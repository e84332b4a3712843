//! Numerical laboratory for time-fractional (Caputo) diffusion with a single
//! boundary measurement.
//!
//! The crate covers the forward problem (staircase Dirichlet input, spectral
//! Mittag-Leffler representation, L1 time stepping), Laplace-domain analysis
//! (resolvent solves, contour realization of the solution operator, weak
//! solution certificates) and the recovery procedures: fractional order,
//! spectral data, initial condition and source, obstacle, and DtN-based
//! distinguishability.

pub mod domain;
pub mod error;
pub mod input;
pub mod inverse;
pub mod laplace;
pub mod linalg;
pub mod mlf;
pub mod quad;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};

/// Crate version, recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
