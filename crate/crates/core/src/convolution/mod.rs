//! Exact-in-law simulation of the stochastic convolution
//!
//! ```text
//! ε dψ_k = (-μ_k + a(t)) ψ_k dt + σ √ε dW_k,
//! ```
//!
//! one Ornstein–Uhlenbeck process per Fourier mode. Conjugate modes share a
//! single complex Gaussian innovation, so every sample is a real field.

mod oracle;
mod path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpdeError};
use crate::field::{laplacian_eigenvalue, modes_in_ball, FourierField, ModeIndex};
use crate::quadrature::{self, phi1};
use crate::wick;

pub use oracle::{chaos_expectation_mc, chaos_expectation_oracle, chaos_expectation_table, ChaosTable};
pub use path::LinearisationPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialLaw {
    /// `ψ_k(0) ~ N(0, σ² / (2(μ_k - a(0))))`, the frozen stationary law.
    Stationary,
    Zero,
}

/// Mode bookkeeping shared by every path of an ensemble.
#[derive(Debug, Clone)]
pub struct OuModel {
    pub eps: f64,
    pub sigma: f64,
    pub path: LinearisationPath,
    pub init: InitialLaw,
    /// Drop the spatial mean (noise acting on non-zero modes only).
    pub exclude_zero_mode: bool,
    cutoff: usize,
    grid: usize,
    /// Distinct values of `‖k‖²` among stored modes.
    classes: Vec<u64>,
    multiplicity: Vec<usize>,
    /// `(slot of k, slot of -k, class)` for each half-plane mode.
    pairs: Vec<(usize, usize, usize)>,
    zero_slot: usize,
}

impl OuModel {
    pub fn new(
        cutoff: usize,
        grid: usize,
        eps: f64,
        sigma: f64,
        path: LinearisationPath,
        init: InitialLaw,
    ) -> Result<Self> {
        if !(eps > 0.0) || !(sigma >= 0.0) {
            return Err(SpdeError::Config(format!("need eps > 0 and sigma >= 0 (eps = {eps}, sigma = {sigma})")));
        }
        let template = FourierField::zeros(cutoff, grid)?;
        let mut classes: Vec<u64> = modes_in_ball(cutoff).map(|k| k.norm_sq()).collect();
        classes.sort_unstable();
        classes.dedup();
        let class_of = |k: ModeIndex| classes.binary_search(&k.norm_sq()).expect("class exists");
        let mut multiplicity = vec![0; classes.len()];
        let mut pairs = Vec::new();
        for k in modes_in_ball(cutoff) {
            multiplicity[class_of(k)] += 1;
            if k.is_half_plane() {
                pairs.push((template.slot(k).unwrap(), template.slot(k.neg()).unwrap(), class_of(k)));
            }
        }
        let zero_slot = template.slot(ModeIndex::ZERO).unwrap();
        Ok(Self {
            eps,
            sigma,
            path,
            init,
            exclude_zero_mode: false,
            cutoff,
            grid,
            classes,
            multiplicity,
            pairs,
            zero_slot,
        })
    }

    pub fn without_zero_mode(mut self) -> Self {
        self.exclude_zero_mode = true;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, k: ModeIndex) -> Option<usize> {
        if k.l1() > self.cutoff as u64 {
            return None;
        }
        self.classes.binary_search(&k.norm_sq()).ok()
    }

    fn eigenvalue(&self, class: usize) -> f64 {
        laplacian_eigenvalue(self.classes[class])
    }

    /// `μ_k` shared by every mode of a class.
    pub fn class_eigenvalue(&self, class: usize) -> f64 {
        self.eigenvalue(class)
    }

    /// Class of each coefficient slot of a field at this cutoff.
    pub(crate) fn slot_classes(&self) -> Vec<Option<usize>> {
        let template = FourierField::zeros(self.cutoff, self.grid).expect("valid grid");
        let mut out = vec![None; template.raw().len()];
        for k in modes_in_ball(self.cutoff) {
            out[template.slot(k).unwrap()] = self.class_of(k);
        }
        out
    }

    fn active(&self, class: usize) -> bool {
        !(self.exclude_zero_mode && self.classes[class] == 0)
    }

    /// Exact transition of every mode class over `[t, t + h]`.
    pub fn transition(&self, t: f64, h: f64) -> Transition {
        let n = self.classes.len();
        let mut decay = vec![0.0; n];
        let mut innovation = vec![0.0; n];
        let s2 = self.sigma * self.sigma;
        let drift = self.path.alpha(t + h, t);
        for c in 0..n {
            if !self.active(c) {
                continue;
            }
            let mu = self.eigenvalue(c);
            decay[c] = ((-mu * h + drift) / self.eps).exp();
            innovation[c] = s2 / self.eps * self.integrated_decay(mu, t, h);
        }
        Transition { t, h, decay, innovation }
    }

    /// `∫_t^{t+h} exp(2 α_k(t+h, s) / ε) ds` with `α_k(t, s) = -μ(t - s) + α(t, s)`.
    fn integrated_decay(&self, mu: f64, t: f64, h: f64) -> f64 {
        if let Some(a) = self.path.is_constant() {
            let lambda = mu - a;
            return h * phi1(-2.0 * lambda * h / self.eps);
        }
        let end = t + h;
        let lambda_min = mu - self.path.max_on(t, end);
        let window = if lambda_min > 0.0 { h.min(25.0 * self.eps / lambda_min) } else { h };
        let integrand = |u: f64| (2.0 * (-mu * u + self.path.alpha(end, end - u)) / self.eps).exp();
        quadrature::integrate(integrand, 0.0, window, 1e-13)
    }

    /// Per-class initial variances `E|ψ_k(0)|²`.
    pub fn initial_variances(&self) -> Result<Vec<f64>> {
        let a0 = self.path.value(0.0);
        (0..self.classes.len())
            .map(|c| {
                if !self.active(c) || self.init == InitialLaw::Zero {
                    return Ok(0.0);
                }
                let lambda = self.eigenvalue(c) - a0;
                if lambda <= 0.0 {
                    return Err(SpdeError::Precondition(format!(
                        "no stationary law for a mode with mu = {} at a(0) = {a0}",
                        self.eigenvalue(c)
                    )));
                }
                Ok(self.sigma * self.sigma / (2.0 * lambda))
            })
            .collect()
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ConvolutionState> {
        let variances = self.initial_variances()?;
        let mut psi = FourierField::zeros(self.cutoff, self.grid)?;
        self.add_noise(&mut psi, &variances, rng);
        Ok(ConvolutionState { t: 0.0, psi, variances })
    }

    fn add_noise<R: Rng + ?Sized>(&self, psi: &mut FourierField, var: &[f64], rng: &mut R) {
        let coeffs = psi.raw_mut();
        if self.active(0) && self.classes[0] == 0 {
            let z: f64 = rng.sample(StandardNormal);
            coeffs[self.zero_slot].re += var[0].sqrt() * z;
        }
        for &(i, j, c) in &self.pairs {
            let s = (0.5 * var[c]).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            coeffs[i].re += s * re;
            coeffs[i].im += s * im;
            coeffs[j] = coeffs[i].conj();
        }
    }

    /// Applies a precomputed transition.
    pub fn advance<R: Rng + ?Sized>(&self, state: &mut ConvolutionState, tr: &Transition, rng: &mut R) {
        debug_assert!((state.t - tr.t).abs() <= 1e-9 * (1.0 + tr.t.abs()), "transition starts at {} not {}", tr.t, state.t);
        {
            let coeffs = state.psi.raw_mut();
            coeffs[self.zero_slot] *= tr.decay[0];
            for &(i, j, c) in &self.pairs {
                coeffs[i] *= tr.decay[c];
                coeffs[j] = coeffs[i].conj();
            }
        }
        self.add_noise(&mut state.psi, &tr.innovation, rng);
        for c in 0..state.variances.len() {
            state.variances[c] = tr.decay[c] * tr.decay[c] * state.variances[c] + tr.innovation[c];
        }
        state.t = tr.t + tr.h;
    }

    /// One exact step of length `dt`.
    pub fn step_exact<R: Rng + ?Sized>(&self, state: &mut ConvolutionState, dt: f64, rng: &mut R) -> Result<()> {
        if !(dt > 0.0) {
            return Err(SpdeError::Config(format!("step {dt} must be positive")));
        }
        let tr = self.transition(state.t, dt);
        self.advance(state, &tr, rng);
        Ok(())
    }

    /// `Σ_k E|ψ_k(t)|²`, the variance parameter of the Wick powers.
    pub fn total_variance(&self, state: &ConvolutionState) -> f64 {
        state.variances.iter().zip(&self.multiplicity).map(|(v, &m)| v * m as f64).sum()
    }

    /// `E|ψ_k(t)|²` for a single mode.
    pub fn mode_variance(&self, state: &ConvolutionState, k: ModeIndex) -> f64 {
        self.class_of(k).map_or(0.0, |c| state.variances[c])
    }

    /// Closed-form variance of a mode at time `t` for constant `a`:
    /// `v(0) e^{2α_k/ε} + σ²/(2λ) (1 - e^{2α_k/ε})`, `λ = μ_k - a`.
    pub fn constant_path_variance(&self, k: ModeIndex, v0: f64, t: f64) -> Option<f64> {
        let a = self.path.is_constant()?;
        let lambda = k.eigenvalue() - a;
        let g = (-2.0 * lambda * t / self.eps).exp();
        let s2 = self.sigma * self.sigma;
        Some(v0 * g + s2 / self.eps * t * phi1(-2.0 * lambda * t / self.eps))
    }

    /// Wick powers `:ψ^m:` for `m = 1..=m_max`, using the current variance.
    pub fn wick_powers_of_psi(&self, state: &ConvolutionState, m_max: usize) -> Result<Vec<FourierField>> {
        wick::wick_powers_field(&state.psi, m_max, self.total_variance(state))
    }

    /// `ψ̂_k(t) = e^{α_k(u_{l+1}, t)/ε} ψ_k(t)` and `v̂_k(t) = e^{2α_k(u_{l+1}, t)/ε} v_k(t)`.
    pub fn martingale_transform(
        &self,
        state: &ConvolutionState,
        partition: &Partition,
        l: usize,
    ) -> Result<MartingaleSnapshot> {
        if l + 1 >= partition.breakpoints.len() {
            return Err(SpdeError::Precondition(format!("interval index {l} out of range")));
        }
        let (lo, hi) = (partition.breakpoints[l], partition.breakpoints[l + 1]);
        let tol = 1e-12 * (1.0 + hi.abs());
        if state.t < lo - tol || state.t > hi + tol {
            return Err(SpdeError::Precondition(format!(
                "time {} outside partition interval [{lo}, {hi}]",
                state.t
            )));
        }
        let drift = self.path.alpha(hi, state.t);
        let factors: Vec<f64> = (0..self.classes.len())
            .map(|c| ((-self.eigenvalue(c) * (hi - state.t) + drift) / self.eps).exp())
            .collect();
        let mut psi = state.psi.clone();
        {
            let coeffs = psi.raw_mut();
            coeffs[self.zero_slot] *= factors[0];
            for &(i, j, c) in &self.pairs {
                coeffs[i] *= factors[c];
                coeffs[j] *= factors[c];
            }
        }
        let variances = state.variances.iter().zip(&factors).map(|(v, f)| v * f * f).collect();
        Ok(MartingaleSnapshot { psi, variances, factors })
    }
}

/// Exact one-step transition: mean factors and innovation variances per
/// mode class.
#[derive(Debug, Clone)]
pub struct Transition {
    pub t: f64,
    pub h: f64,
    pub decay: Vec<f64>,
    pub innovation: Vec<f64>,
}

/// Transitions for a fixed schedule, shared read-only by ensemble paths.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub times: Vec<f64>,
    pub steps: Vec<Transition>,
}

impl Propagator {
    pub fn new(model: &OuModel, times: &[f64]) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpdeError::Config("time grid must be strictly increasing".into()));
        }
        let steps = times.windows(2).map(|w| model.transition(w[0], w[1] - w[0])).collect();
        Ok(Self { times: times.to_vec(), steps })
    }
}

#[derive(Debug, Clone)]
pub struct ConvolutionState {
    pub t: f64,
    pub psi: FourierField,
    /// `E|ψ_k(t)|²` per mode class.
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MartingaleSnapshot {
    pub psi: FourierField,
    /// `v̂` per mode class.
    pub variances: Vec<f64>,
    pub factors: Vec<f64>,
}

/// Breakpoints `0 = u_0 ≤ u_1 < … < u_L = T` with `α_{k0}(u_{l+1}, u_l) = -γ₀ε`
/// on every interval after the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub gamma0: f64,
    pub reference: ModeIndex,
    pub breakpoints: Vec<f64>,
}

pub const MAX_PARTITION_INTERVALS: f64 = 1e7;

impl Partition {
    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Index `l` with `u_l ≤ t ≤ u_{l+1}`.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        let b = &self.breakpoints;
        if t < b[0] || t > b[b.len() - 1] {
            return None;
        }
        Some(b.partition_point(|&u| u <= t).saturating_sub(1).min(b.len() - 2))
    }
}

fn reference_mode(q_bar: u32) -> Result<ModeIndex> {
    if q_bar > 40 {
        return Err(SpdeError::Capacity(format!("reference annulus {q_bar} too large")));
    }
    Ok(ModeIndex::new(1i64 << q_bar, 0))
}

/// Partition for `a ≡ -1`: `L = ⌊(μ_{k0} + 1) T / (γ₀ ε)⌋` with
/// `k0 = (2^q̄, 0)`.
pub fn build_partition(t_end: f64, eps: f64, gamma0: f64, q_bar: u32) -> Result<Partition> {
    if !(t_end > 0.0 && eps > 0.0 && gamma0 > 0.0) {
        return Err(SpdeError::Config("partition needs T, eps, gamma0 > 0".into()));
    }
    let k0 = reference_mode(q_bar)?;
    let rate = k0.eigenvalue() + 1.0;
    let count = (rate * t_end / (gamma0 * eps)).floor();
    if count > MAX_PARTITION_INTERVALS {
        return Err(SpdeError::Capacity(format!("partition would need {count} intervals")));
    }
    let l = count as usize;
    let width = gamma0 * eps / rate;
    let mut breakpoints = Vec::with_capacity(l + 1);
    breakpoints.push(0.0);
    for j in 1..=l {
        breakpoints.push(t_end - (l - j) as f64 * width);
    }
    if l == 0 {
        breakpoints.push(t_end);
    }
    Ok(Partition { gamma0, reference: k0, breakpoints })
}

/// Partition for a general path, solving `α_{k0}(u_{l+1}, u_l) = -γ₀ε`
/// backwards from `T` by bisection.
pub fn build_partition_for_path(
    path: &LinearisationPath,
    t_end: f64,
    eps: f64,
    gamma0: f64,
    q_bar: u32,
) -> Result<Partition> {
    if !(t_end > 0.0 && eps > 0.0 && gamma0 > 0.0) {
        return Err(SpdeError::Config("partition needs T, eps, gamma0 > 0".into()));
    }
    let k0 = reference_mode(q_bar)?;
    let mu = k0.eigenvalue();
    let target = gamma0 * eps;
    let decay = |hi: f64, lo: f64| mu * (hi - lo) - path.alpha(hi, lo);
    let mut rev = vec![t_end];
    let mut hi = t_end;
    // The first interval absorbs the remainder, so it spans between one and
    // two nominal widths.
    while decay(hi, 0.0) >= target {
        let (mut a, mut b) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if decay(hi, mid) > target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let next = 0.5 * (a + b);
        if decay(next, 0.0) < target {
            break;
        }
        hi = next;
        rev.push(hi);
        if rev.len() as f64 > MAX_PARTITION_INTERVALS {
            return Err(SpdeError::Capacity("partition exceeds interval budget".into()));
        }
    }
    rev.push(0.0);
    rev.reverse();
    Ok(Partition { gamma0, reference: k0, breakpoints: rev })
}
