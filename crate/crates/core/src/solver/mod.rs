//! Deterministic and random parts of the splitting `φ = φ̄ + ψ + φ₁`.
//!
//! [`deterministic_track`] integrates the noiseless equation near a stable
//! equilibrium branch, [`Phi1Stepper`] the random remainder equation, and
//! [`PitchforkModel`] the coupled zero-mode SDE and transverse SPDE near a
//! pitchfork. All time stepping uses exponential integrating factors with
//! exact linear mode factors.

mod branch;
mod drift;
mod pitchfork;
mod schauder;
mod split;
mod track;
mod variance;

pub use branch::{find_equilibrium_branch, EquilibriumBranch};
pub use drift::{Coefficient, DriftPolynomial};
pub use pitchfork::{pitchfork_step, PitchforkModel, PitchforkSchedule, PitchforkState};
pub use schauder::schauder_check;
pub use split::{
    evolve_phi1, shifted_coefficients, shifted_drift, shifted_drift_at, NormSpec, Phi1Path, Phi1Stepper, ShiftedDrift,
    SplitSolution, DEFAULT_DIVERGENCE_GUARD,
};
pub use track::{deterministic_track, TrackOptions, TrackResult};
pub use variance::{linear_variance_profile, variance_asymptotic, VarianceRegime};
