use super::{DriftPolynomial, EquilibriumBranch};
use crate::error::{Result, SpdeError};
use crate::field::{dealiased_grid_size, from_grid, h1_norm, FourierField};
use crate::quadrature::phi1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    /// Bound on the L² step-doubling error estimate.
    pub tol: f64,
    pub h_initial: f64,
    pub h_floor: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { tol: 1e-6, h_initial: 1e-4, h_floor: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub times: Vec<f64>,
    pub fields: Vec<FourierField>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrackResult {
    /// `sup_t ‖φ̄(t) - φ*(t) e₀‖_{H¹}` over the output times.
    pub fn sup_h1_distance(&self, branch: &EquilibriumBranch) -> f64 {
        self.times
            .iter()
            .zip(&self.fields)
            .map(|(&t, f)| {
                let star = FourierField::constant(branch.root_at(t), f.cutoff(), f.grid_size()).expect("valid grid");
                h1_norm(&f.sub(&star))
            })
            .fold(0.0, f64::max)
    }
}

/// Grid values of `F(t, φ) - ā φ` mapped back to the cutoff.
pub(crate) fn drift_remainder(f: &DriftPolynomial, t: f64, field: &FourierField, a_bar: f64) -> FourierField {
    let coeffs = f.coefficients_at(t);
    let values: Vec<f64> = field
        .to_grid()
        .into_iter()
        .map(|x| super::drift::horner(&coeffs, x) - a_bar * x)
        .collect();
    from_grid(&values, field.cutoff(), field.grid_size())
}

/// Exponential Euler step of `ε ∂_t φ = Δφ + F(t, φ)` with the linear part
/// `Δ + ā`, `ā = ∂_φ F(t, mean φ)` frozen over the step.
fn etd1_step(f: &DriftPolynomial, eps: f64, t: f64, h: f64, field: &FourierField) -> FourierField {
    let a_bar = f.d_phi(t, field.mean());
    let rest = drift_remainder(f, t, field, a_bar);
    let mut next = field.clone();
    let modes: Vec<_> = field.modes().collect();
    for k in modes {
        let z = (-k.eigenvalue() + a_bar) * h / eps;
        let value = field.coeff(k) * z.exp() + rest.coeff(k) * (h / eps * phi1(z));
        next.set(k, value);
    }
    next
}

/// Integrates the noiseless equation `ε ∂_t φ = Δφ + F(t, φ)` through
/// `times`, starting from `init` at `times[0]`. Step doubling keeps the L²
/// error estimate below `opts.tol`.
pub fn deterministic_track(
    f: &DriftPolynomial,
    eps: f64,
    init: &FourierField,
    times: &[f64],
    opts: TrackOptions,
) -> Result<TrackResult> {
    if !(eps > 0.0) {
        return Err(SpdeError::Config(format!("eps must be positive (got {eps})")));
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpdeError::Config("time grid must be non-empty and strictly increasing".into()));
    }
    let n = init.cutoff();
    let work_grid = init.grid_size().max(dealiased_grid_size(n, f.degree(), n));
    let mut phi = init.with_grid_size(work_grid)?;
    let mut fields = vec![init.clone()];
    let (mut accepted, mut rejected) = (0, 0);
    let mut t = times[0];
    let mut h = opts.h_initial;
    for &target in &times[1..] {
        while target - t > 1e-14 * (1.0 + target.abs()) {
            let step = h.min(target - t);
            let full = etd1_step(f, eps, t, step, &phi);
            let half = etd1_step(f, eps, t, 0.5 * step, &phi);
            let two = etd1_step(f, eps, t + 0.5 * step, 0.5 * step, &half);
            let err = two.sub(&full).l2_norm();
            if !two.is_finite() {
                return Err(SpdeError::Numeric(format!("non-finite tracker state at t = {t}")));
            }
            let factor = if err > 0.0 { (0.9 * (opts.tol / err).sqrt()).clamp(0.2, 2.0) } else { 2.0 };
            if err <= opts.tol {
                phi = two;
                t += step;
                accepted += 1;
                if step >= h {
                    h *= factor;
                }
                else {
                    h = h.max(step * factor);
                }
            } else {
                rejected += 1;
                h = step * factor;
                if h < opts.h_floor {
                    return Err(SpdeError::StepFloor { t, floor: opts.h_floor });
                }
            }
        }
        t = target;
        fields.push(phi.with_grid_size(init.grid_size())?);
    }
    Ok(TrackResult { times: times.to_vec(), fields, accepted_steps: accepted, rejected_steps: rejected })
}
