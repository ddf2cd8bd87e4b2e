use rand::Rng;
use rand_distr::StandardNormal;

use crate::convolution::{ConvolutionState, InitialLaw, LinearisationPath, OuModel, Propagator};
use crate::error::{Result, SpdeError};
use crate::field::{from_grid, to_grid_pair, FourierField};
use crate::quadrature::phi1;
use crate::wick::hermite_all;

use super::split::DEFAULT_DIVERGENCE_GUARD;

/// The system for `φ₁ = φ₁⁰ e₀ + φ₁^⊥` near a pitchfork, driven by `ψ_⊥`,
/// the stochastic convolution of the noise on non-zero modes.
#[derive(Debug, Clone)]
pub struct PitchforkModel {
    pub eps: f64,
    pub sigma: f64,
    pub path: LinearisationPath,
    /// Drop the cubic and `F₀` terms, leaving the linear zero-mode SDE.
    pub linearised: bool,
    pub guard: f64,
    psi: OuModel,
    zero: OuModel,
    slot_class: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct PitchforkState {
    pub t: f64,
    pub phi10: f64,
    pub perp: FourierField,
    pub psi: ConvolutionState,
}

/// Transitions and integrating factors for a fixed time grid.
#[derive(Debug, Clone)]
pub struct PitchforkSchedule {
    pub times: Vec<f64>,
    psi: Propagator,
    zero: Propagator,
    decay: Vec<Vec<f64>>,
    weight: Vec<Vec<f64>>,
    zero_weight: Vec<f64>,
}

impl PitchforkModel {
    pub fn new(cutoff: usize, grid: usize, eps: f64, sigma: f64, path: LinearisationPath) -> Result<Self> {
        let psi = OuModel::new(cutoff, grid, eps, sigma, path.clone(), InitialLaw::Zero)?.without_zero_mode();
        let zero = OuModel::new(0, 1, eps, sigma, path.clone(), InitialLaw::Zero)?;
        let slot_class = psi.slot_classes();
        Ok(Self { eps, sigma, path, linearised: false, guard: DEFAULT_DIVERGENCE_GUARD, psi, zero, slot_class })
    }

    pub fn linearised(mut self) -> Self {
        self.linearised = true;
        self
    }

    pub fn psi_model(&self) -> &OuModel {
        &self.psi
    }

    pub fn initial_state(&self, phi10: f64) -> Result<PitchforkState> {
        let (n, m) = (self.psi.cutoff(), self.psi.grid_size());
        Ok(PitchforkState {
            t: 0.0,
            phi10,
            perp: FourierField::zeros(n, m)?,
            psi: ConvolutionState { t: 0.0, psi: FourierField::zeros(n, m)?, variances: vec![0.0; self.psi.class_count()] },
        })
    }

    pub fn schedule(&self, times: &[f64]) -> Result<PitchforkSchedule> {
        let psi = Propagator::new(&self.psi, times)?;
        let zero = Propagator::new(&self.zero, times)?;
        let mut decay = Vec::with_capacity(psi.steps.len());
        let mut weight = Vec::with_capacity(psi.steps.len());
        let mut zero_weight = Vec::with_capacity(psi.steps.len());
        for w in times.windows(2) {
            let h = w[1] - w[0];
            let drift = self.path.alpha(w[1], w[0]);
            zero_weight.push(h / self.eps * phi1(drift / self.eps));
            let z: Vec<f64> = (0..self.psi.class_count()).map(|c| (-self.psi.class_eigenvalue(c) * h + drift) / self.eps).collect();
            decay.push(z.iter().map(|z| z.exp()).collect());
            weight.push(z.iter().map(|&z| h / self.eps * phi1(z)).collect());
        }
        Ok(PitchforkSchedule { times: times.to_vec(), psi, zero, decay, weight, zero_weight })
    }

    /// `:F:` with `φ₁ = φ₁⁰ + φ₁^⊥` and `ψ = ψ_⊥`, split into
    /// `F₀ = ⟨e₀, :F:⟩ + (φ₁⁰)³` and `F_⊥ = :F: - ⟨e₀, :F:⟩ e₀`.
    pub fn nonlinearity(&self, state: &PitchforkState) -> (f64, FourierField) {
        let c = self.psi.total_variance(&state.psi);
        let (p, s) = to_grid_pair(&state.perp, &state.psi.psi);
        let mut h = [0.0; 4];
        let values: Vec<f64> = p
            .iter()
            .zip(&s)
            .map(|(&p, &s)| {
                hermite_all(s, c, &mut h);
                let u = state.phi10 + p;
                -h[3] - 3.0 * u * h[2] - 3.0 * u * u * h[1] - u * u * u
            })
            .collect();
        let mut g = from_grid(&values, state.perp.cutoff(), state.perp.grid_size());
        let mean = g.mean();
        g.set(crate::field::ModeIndex::ZERO, 0.0.into());
        (mean + state.phi10.powi(3), g)
    }

    /// One step of the coupled system over `schedule` step `step`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        schedule: &PitchforkSchedule,
        step: usize,
        state: &mut PitchforkState,
        rng: &mut R,
    ) -> Result<()> {
        let zt = &schedule.zero.steps[step];
        let (zd, zw) = (zt.decay[0], schedule.zero_weight[step]);
        if self.linearised {
            state.phi10 *= zd;
        } else {
            let (f0, fperp) = self.nonlinearity(state);
            let (decay, weight) = (&schedule.decay[step], &schedule.weight[step]);
            let src = fperp.raw();
            for (slot, v) in state.perp.raw_mut().iter_mut().enumerate() {
                match self.slot_class[slot] {
                    Some(c) if c > 0 => *v = *v * decay[c] + src[slot] * weight[c],
                    _ => {}
                }
            }
            state.phi10 = zd * state.phi10 + zw * (f0 - state.phi10.powi(3));
        }
        self.psi.advance(&mut state.psi, &schedule.psi.steps[step], rng);
        let z: f64 = rng.sample(StandardNormal);
        state.phi10 += zt.innovation[0].sqrt() * z;
        state.t = schedule.times[step + 1];
        let norm = state.phi10.abs().max(state.perp.l2_norm());
        if !norm.is_finite() || norm > self.guard {
            return Err(SpdeError::Divergence { t: state.t, norm, guard: self.guard });
        }
        Ok(())
    }
}

/// Free-function form of [`PitchforkModel::step`].
pub fn pitchfork_step<R: Rng + ?Sized>(
    model: &PitchforkModel,
    schedule: &PitchforkSchedule,
    step: usize,
    state: &mut PitchforkState,
    rng: &mut R,
) -> Result<()> {
    model.step(schedule, step, state, rng)
}
