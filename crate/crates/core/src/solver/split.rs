use super::{DriftPolynomial, EquilibriumBranch};
use crate::convolution::{ConvolutionState, OuModel, Propagator};
use crate::error::{Result, SpdeError};
use crate::field::{besov_norm_l2, dealiased_grid_size, from_grid, holder_norm_sampled, to_grid_pair, FourierField};
use crate::quadrature::phi1;
use crate::wick::hermite_all;

pub const DEFAULT_DIVERGENCE_GUARD: f64 = 1e6;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `[Â_1, …, Â_n]` at one point: `Â_j = Σ_{i≥j} C(i,j) A_i φ̄^{i-j}` for
/// `j ≥ 2` and `Â_1 = Σ_{i≥2} i A_i (φ̄^{i-1} - φ*^{i-1})`.
pub fn shifted_coefficients(coeffs: &[f64], phibar: f64, phi_star: f64) -> Vec<f64> {
    let n = coeffs.len() - 1;
    let mut out = vec![0.0; n];
    out[0] = (2..=n).map(|i| i as f64 * coeffs[i] * (phibar.powi(i as i32 - 1) - phi_star.powi(i as i32 - 1))).sum();
    for j in 2..=n {
        out[j - 1] = (j..=n).map(|i| binomial(i, j) * coeffs[i] * phibar.powi((i - j) as i32)).sum();
    }
    out
}

/// Coefficients of the drift seen by `φ₀ = φ - φ̄`:
/// `:F(φ̄ + φ₀): - F(φ̄) = a φ₀ + Σ_j Â_j :φ₀^j:`.
#[derive(Debug, Clone)]
pub struct ShiftedDrift {
    pub t: f64,
    pub a: f64,
    /// `Â_j` at index `j - 1`.
    pub fields: Vec<FourierField>,
    uniform: Option<Vec<f64>>,
}

impl ShiftedDrift {
    pub fn a_hat(&self, j: usize) -> &FourierField {
        &self.fields[j - 1]
    }

    pub fn degree(&self) -> usize {
        self.fields.len()
    }

    /// Scalar values when `φ̄` is spatially constant.
    pub fn uniform(&self) -> Option<&[f64]> {
        self.uniform.as_deref()
    }
}

/// Builds `a(t)` and `Â_j(t, ·)` from the tracker field `φ̄` at a branch time.
pub fn shifted_drift(f: &DriftPolynomial, branch: &EquilibriumBranch, t: f64, phibar: &FourierField) -> Result<ShiftedDrift> {
    let idx = branch
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
        .ok_or_else(|| SpdeError::Precondition(format!("time {t} is not a branch grid time")))?;
    shifted_drift_at(f, t, branch.roots[idx], branch.slopes[idx], phibar)
}

/// As [`shifted_drift`] with the root and linearisation supplied directly.
pub fn shifted_drift_at(f: &DriftPolynomial, t: f64, phi_star: f64, a: f64, phibar: &FourierField) -> Result<ShiftedDrift> {
    let n = f.degree();
    let coeffs = f.coefficients_at(t);
    let (cut, grid) = (phibar.cutoff(), phibar.grid_size());
    if phibar.is_spatially_constant() {
        let values = shifted_coefficients(&coeffs, phibar.mean(), phi_star);
        let fields = values.iter().map(|&v| FourierField::constant(v, cut, grid)).collect::<Result<_>>()?;
        return Ok(ShiftedDrift { t, a, fields, uniform: Some(values) });
    }
    let work = phibar.with_grid_size(grid.max(dealiased_grid_size(cut, n - 1, cut)))?;
    let points: Vec<Vec<f64>> = work.to_grid().into_iter().map(|x| shifted_coefficients(&coeffs, x, phi_star)).collect();
    let fields = (0..n)
        .map(|j| {
            let values: Vec<f64> = points.iter().map(|p| p[j]).collect();
            from_grid(&values, cut, work.grid_size()).with_grid_size(grid)
        })
        .collect::<Result<_>>()?;
    Ok(ShiftedDrift { t, a, fields, uniform: None })
}

/// A full solution assembled from its three parts at one time.
#[derive(Debug, Clone)]
pub struct SplitSolution {
    pub phibar: FourierField,
    pub psi: ConvolutionState,
    pub phi1: FourierField,
    pub shifted: ShiftedDrift,
}

impl SplitSolution {
    pub fn t(&self) -> f64 {
        self.psi.t
    }

    /// `φ = φ̄ + ψ + φ₁`.
    pub fn reconstruct(&self) -> Result<FourierField> {
        let grid = self.psi.psi.grid_size();
        Ok(self.phibar.with_grid_size(grid)?.add(&self.psi.psi).add(&self.phi1.with_grid_size(grid)?))
    }
}

/// Integrator for the random PDE
/// `ε ∂_t φ₁ = (Δ + a(t)) φ₁ + Σ_j Â_j Σ_{ℓ≤j} C(j,ℓ) φ₁^{j-ℓ} :ψ^ℓ:`
/// on the schedule of a [`Propagator`], so `ψ` and `φ₁` share time stamps.
#[derive(Debug, Clone)]
pub struct Phi1Stepper {
    pub eps: f64,
    pub times: Vec<f64>,
    pub guard: f64,
    decay: Vec<Vec<f64>>,
    weight: Vec<Vec<f64>>,
    slot_class: Vec<Option<usize>>,
    shifted: Vec<ShiftedDrift>,
}

impl Phi1Stepper {
    /// `shifted` holds one entry per step start, or a single time-independent entry.
    pub fn new(model: &OuModel, propagator: &Propagator, shifted: Vec<ShiftedDrift>, guard: f64) -> Result<Self> {
        let steps = propagator.steps.len();
        if shifted.is_empty() || (shifted.len() != 1 && shifted.len() != steps) {
            return Err(SpdeError::Precondition(format!(
                "need 1 or {steps} shifted-drift entries, got {}",
                shifted.len()
            )));
        }
        if shifted.len() == steps {
            for (s, &t) in shifted.iter().zip(&propagator.times) {
                if (s.t - t).abs() > 1e-12 * (1.0 + t.abs()) {
                    return Err(SpdeError::Precondition(format!("shifted drift at {} does not match step time {t}", s.t)));
                }
            }
        }
        let mut decay = Vec::with_capacity(steps);
        let mut weight = Vec::with_capacity(steps);
        for w in propagator.times.windows(2) {
            let h = w[1] - w[0];
            let drift = model.path.alpha(w[1], w[0]);
            let z: Vec<f64> = (0..model.class_count()).map(|c| (-model.class_eigenvalue(c) * h + drift) / model.eps).collect();
            decay.push(z.iter().map(|z| z.exp()).collect());
            weight.push(z.iter().map(|&z| h / model.eps * phi1(z)).collect());
        }
        Ok(Self {
            eps: model.eps,
            times: propagator.times.clone(),
            guard,
            decay,
            weight,
            slot_class: model.slot_classes(),
            shifted,
        })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn shifted(&self, step: usize) -> &ShiftedDrift {
        &self.shifted[step.min(self.shifted.len() - 1)]
    }

    /// `:b:` projected to the cutoff, evaluated on the common grid through the
    /// binomial expansion in `φ₁` and `:ψ^ℓ:` with Wick variance `c`.
    pub fn nonlinearity(&self, step: usize, phi1: &FourierField, psi: &FourierField, c: f64) -> FourierField {
        let sd = self.shifted(step);
        let n = sd.degree();
        let m = phi1.grid_size();
        let (u, v) = to_grid_pair(phi1, psi);
        let grids: Option<Vec<Vec<f64>>> =
            if sd.uniform().is_some() { None } else { Some(sd.fields.iter().map(|f| f.with_grid_size(m).expect("grid").to_grid()).collect()) };
        let binom: Vec<Vec<f64>> = (0..=n).map(|j| (0..=j).map(|l| binomial(j, l)).collect()).collect();
        let mut herm = vec![0.0; n + 1];
        let mut pow = vec![0.0; n + 1];
        let mut coef = vec![0.0; n];
        let values: Vec<f64> = (0..m * m)
            .map(|x| {
                hermite_all(v[x], c, &mut herm);
                pow[0] = 1.0;
                for p in 1..=n {
                    pow[p] = pow[p - 1] * u[x];
                }
                match (&grids, sd.uniform()) {
                    (Some(g), _) => coef.iter_mut().zip(g).for_each(|(c, g)| *c = g[x]),
                    (None, Some(uni)) => coef.copy_from_slice(uni),
                    (None, None) => unreachable!(),
                }
                (1..=n)
                    .map(|j| coef[j - 1] * (0..=j).map(|l| binom[j][l] * pow[j - l] * herm[l]).sum::<f64>())
                    .sum()
            })
            .collect();
        from_grid(&values, phi1.cutoff(), m)
    }

    /// Advances `φ₁` over step `step` given `ψ` and its Wick variance at the step start.
    pub fn step(&self, step: usize, phi1: &mut FourierField, psi: &FourierField, c: f64) -> Result<()> {
        let b = self.nonlinearity(step, phi1, psi, c);
        let (decay, weight) = (&self.decay[step], &self.weight[step]);
        let src = b.raw();
        for (slot, value) in phi1.raw_mut().iter_mut().enumerate() {
            if let Some(cl) = self.slot_class[slot] {
                *value = *value * decay[cl] + src[slot] * weight[cl];
            }
        }
        let norm = phi1.l2_norm();
        if !norm.is_finite() || norm > self.guard {
            return Err(SpdeError::Divergence { t: self.times[step + 1], norm, guard: self.guard });
        }
        Ok(())
    }
}

/// Which norms of `φ₁` to record at each time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    /// Exponent γ: records `‖φ₁‖_{B^γ_{2,∞}}` and `‖φ₁‖_{C^{γ-1}}`.
    pub gamma: f64,
    pub holder_grid: usize,
    pub keep_fields: bool,
}

#[derive(Debug, Clone)]
pub struct Phi1Path {
    pub times: Vec<f64>,
    pub besov: Vec<f64>,
    pub holder: Vec<f64>,
    pub fields: Vec<FourierField>,
}

impl Phi1Path {
    pub fn sup_holder(&self) -> f64 {
        self.holder.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_besov(&self) -> f64 {
        self.besov.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the stepper over a recorded `ψ` path (`psi[i]` at `times[i]` with
/// Wick variance `wick_variances[i]`).
pub fn evolve_phi1(
    stepper: &Phi1Stepper,
    init: &FourierField,
    psi: &[FourierField],
    wick_variances: &[f64],
    norms: NormSpec,
) -> Result<Phi1Path> {
    let n = stepper.times.len();
    if psi.len() < n - 1 || wick_variances.len() < n - 1 {
        return Err(SpdeError::Precondition(format!("psi path shorter than the {} steps", n - 1)));
    }
    let mut phi1 = init.clone();
    let mut path = Phi1Path { times: vec![], besov: vec![], holder: vec![], fields: vec![] };
    let mut record = |t: f64, f: &FourierField| -> Result<()> {
        path.times.push(t);
        path.besov.push(besov_norm_l2(f, norms.gamma, f64::INFINITY)?);
        path.holder.push(holder_norm_sampled(f, norms.gamma - 1.0, norms.holder_grid)?);
        if norms.keep_fields {
            path.fields.push(f.clone());
        }
        Ok(())
    };
    record(stepper.times[0], &phi1)?;
    for i in 0..n - 1 {
        stepper.step(i, &mut phi1, &psi[i], wick_variances[i])?;
        record(stepper.times[i + 1], &phi1)?;
    }
    Ok(path)
}
