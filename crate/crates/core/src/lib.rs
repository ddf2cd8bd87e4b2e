//! Pseudospectral simulation of Wick-renormalised stochastic PDEs on the
//! two-dimensional torus `T² = (R/Z)²`.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`]: truncated Fourier fields, grid transforms, Littlewood–Paley
//!   blocks and the Besov / Hölder / H¹ norms built on them.
//! - [`wick`]: Hermite polynomials with a variance parameter, Wick powers of
//!   fields and the renormalisation constant.
//! - [`convolution`]: exact-in-law sampling of the stochastic convolution,
//!   its martingale transform and the brute-force chaos expectation.
//! - [`solver`]: equilibrium branches, the deterministic tracker, the
//!   remainder equation for `φ₁ = φ - φ̄ - ψ` and the pitchfork system.
//! - [`experiments`]: Monte Carlo harnesses producing tail, concentration
//!   and exit-time reports.

pub mod convolution;
pub mod error;
pub mod experiments;
pub mod field;
pub mod parallel;
pub mod quadrature;
pub mod solver;
pub mod stats;
pub mod wick;

pub use error::{Result, SpdeError};
pub use field::{FourierField, ModeIndex};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
