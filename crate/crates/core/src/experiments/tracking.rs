use serde::{Deserialize, Serialize};

use super::common::{uniform_times, Gate};
use crate::error::{Result, SpdeError};
use crate::field::FourierField;
use crate::solver::{deterministic_track, find_equilibrium_branch, DriftPolynomial, TrackOptions};

#[derive(Debug, Clone)]
pub struct TrackingConfig {
    pub drift: DriftPolynomial,
    pub branch_seed: f64,
    /// Decreasing sweep, ideally by halving.
    pub eps: Vec<f64>,
    pub t_end: f64,
    /// Output grid spacing.
    pub dt: f64,
    pub cutoff: usize,
    pub grid: usize,
    /// Expected distance ratio per halving of ε, with tolerance.
    pub expected_ratio: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingPoint {
    pub eps: f64,
    /// `sup_t ‖φ̄(t) - φ*(t) e₀‖_{H¹}`.
    pub distance: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub t_end: f64,
    pub cutoff: usize,
    pub points: Vec<TrackingPoint>,
    /// `distance(ε_i) / distance(ε_{i+1})`, normalised to one halving.
    pub ratios: Vec<f64>,
    pub gates: Vec<Gate>,
}

impl TrackingReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Distance of the deterministic solution started on the branch from the
/// branch itself, across an ε-sweep.
pub fn tracking_experiment(cfg: &TrackingConfig) -> Result<TrackingReport> {
    if cfg.eps.is_empty() || cfg.eps.iter().any(|&e| !(e > 0.0)) {
        return Err(SpdeError::Config("tracking needs a non-empty list of positive eps".into()));
    }
    let times = uniform_times(cfg.t_end, cfg.dt)?;
    let branch = find_equilibrium_branch(&cfg.drift, &times, cfg.branch_seed)?;
    if let Some(t) = branch.first_unstable_time() {
        return Err(SpdeError::Precondition(format!("equilibrium branch loses stability at t = {t}")));
    }
    let init = FourierField::constant(branch.roots[0], cfg.cutoff, cfg.grid)?;
    let points = cfg
        .eps
        .iter()
        .map(|&eps| {
            let track = deterministic_track(&cfg.drift, eps, &init, &times, TrackOptions::default())?;
            Ok(TrackingPoint {
                eps,
                distance: track.sup_h1_distance(&branch),
                accepted_steps: track.accepted_steps,
                rejected_steps: track.rejected_steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = points
        .windows(2)
        .map(|w| (w[0].distance / w[1].distance).powf(1.0 / (w[0].eps / w[1].eps).log2()))
        .collect();
    let mut gates = Vec::new();
    if let Some((target, tol)) = cfg.expected_ratio {
        for (w, r) in points.windows(2).zip(&ratios) {
            gates.push(Gate::new(
                format!("tracking ratio eps {} -> {}", w[0].eps, w[1].eps),
                (r - target).abs() <= tol,
                *r,
                format!("expected {target} +/- {tol}"),
            ));
        }
    }
    Ok(TrackingReport { t_end: cfg.t_end, cutoff: cfg.cutoff, points, ratios, gates })
}
