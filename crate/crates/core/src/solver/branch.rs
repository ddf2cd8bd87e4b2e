use serde::{Deserialize, Serialize};

use super::DriftPolynomial;
use crate::convolution::LinearisationPath;
use crate::error::{Result, SpdeError};

const ROOT_TOL: f64 = 1e-12;
const COLLISION: f64 = 1e-8;
const MAX_NEWTON: usize = 60;
const MAX_HALVINGS: u32 = 20;

/// A root `φ*(t)` of `F(t, ·)` with its linearisation `a(t) = ∂_φ F(t, φ*(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumBranch {
    pub times: Vec<f64>,
    pub roots: Vec<f64>,
    pub slopes: Vec<f64>,
    pub stable: Vec<bool>,
}

impl EquilibriumBranch {
    /// `(a₋, a₊)` with `-a₊ ≤ a(t) ≤ -a₋` on the grid.
    pub fn margins(&self) -> (f64, f64) {
        let max = self.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.slopes.iter().copied().fold(f64::INFINITY, f64::min);
        (-max, -min)
    }

    pub fn first_unstable_time(&self) -> Option<f64> {
        self.stable.iter().position(|s| !s).map(|i| self.times[i])
    }

    pub fn linearisation_path(&self) -> LinearisationPath {
        LinearisationPath::tabulated(self.times.clone(), self.slopes.clone())
            .expect("branch times increase and match the slopes")
    }

    /// Linear interpolation of the root.
    pub fn root_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            self.roots[0]
        } else if i == self.times.len() {
            self.roots[i - 1]
        } else {
            let w = (t - self.times[i - 1]) / (self.times[i] - self.times[i - 1]);
            self.roots[i - 1] + w * (self.roots[i] - self.roots[i - 1])
        }
    }
}

fn newton(f: &DriftPolynomial, t: f64, seed: f64) -> Result<Option<f64>> {
    let mut phi = seed;
    let mut value = f.eval(t, phi);
    for _ in 0..MAX_NEWTON {
        if value.abs() < ROOT_TOL * (1.0 + phi.abs().powi(f.degree() as i32)) {
            return Ok(Some(phi));
        }
        let slope = f.d_phi(t, phi);
        if slope.abs() < COLLISION {
            return Err(SpdeError::BranchTracking {
                t,
                reason: format!("derivative {slope:e} vanishes near the root (root collision)"),
            });
        }
        let step = value / slope;
        let mut damping = 1.0;
        loop {
            let trial = phi - damping * step;
            let tv = f.eval(t, trial);
            if tv.abs() < value.abs() || damping < 1e-6 {
                phi = trial;
                value = tv;
                break;
            }
            damping *= 0.5;
        }
    }
    Ok(None)
}

fn continue_to(f: &DriftPolynomial, t0: f64, t1: f64, seed: f64, depth: u32) -> Result<f64> {
    if let Some(root) = newton(f, t1, seed)? {
        if (root - seed).abs() <= 1.0 + seed.abs() {
            return Ok(root);
        }
    }
    if depth >= MAX_HALVINGS {
        return Err(SpdeError::BranchTracking { t: t1, reason: "Newton continuation did not converge".into() });
    }
    let mid = 0.5 * (t0 + t1);
    let at_mid = continue_to(f, t0, mid, seed, depth + 1)?;
    continue_to(f, mid, t1, at_mid, depth + 1)
}

/// Follows the root through `times` by damped Newton continuation from
/// `seed` near the root at `times[0]`. Loss of stability is flagged, not
/// treated as failure.
pub fn find_equilibrium_branch(f: &DriftPolynomial, times: &[f64], seed: f64) -> Result<EquilibriumBranch> {
    if times.is_empty() {
        return Err(SpdeError::Precondition("empty time grid".into()));
    }
    let first = newton(f, times[0], seed)?.ok_or_else(|| SpdeError::BranchTracking {
        t: times[0],
        reason: "no root found from the seed".into(),
    })?;
    let mut roots = vec![first];
    for w in times.windows(2) {
        let prev = *roots.last().unwrap();
        roots.push(continue_to(f, w[0], w[1], prev, 0)?);
    }
    let slopes: Vec<f64> = times.iter().zip(&roots).map(|(&t, &r)| f.d_phi(t, r)).collect();
    let stable = slopes.iter().map(|&a| a < 0.0).collect();
    Ok(EquilibriumBranch { times: times.to_vec(), roots, slopes, stable })
}
