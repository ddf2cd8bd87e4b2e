use serde::{Deserialize, Serialize};

use super::common::{record_steps, uniform_times, Gate, Summary};
use crate::convolution::{InitialLaw, LinearisationPath, OuModel, Propagator};
use crate::error::{Result, SpdeError};
use crate::field::{holder_norm_sampled, FourierField};
use crate::parallel::Ensemble;
use crate::solver::{
    deterministic_track, find_equilibrium_branch, shifted_drift, DriftPolynomial, Phi1Stepper, PitchforkModel,
    TrackOptions,
};
use crate::stats::linear_fit;

/// A σ-sweep at fixed ε, with an optional gate on the median ratio per σ-doubling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi1Sweep {
    pub eps: f64,
    pub sigmas: Vec<f64>,
    pub expected_ratio: Option<f64>,
    pub ratio_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Phi1Config {
    pub drift: DriftPolynomial,
    pub branch_seed: f64,
    pub sweeps: Vec<Phi1Sweep>,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub gamma: f64,
    pub nu: f64,
    pub holder_grid: usize,
    pub paths: usize,
    /// Time step as a fraction of ε.
    pub dt_over_eps: f64,
    /// Norms are recorded every `record_stride` steps.
    pub record_stride: usize,
    pub seed: u64,
    pub threads: usize,
    pub guard: f64,
}

impl Phi1Config {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.gamma < 2.0) || !(self.nu < 1.0 - self.gamma / 2.0) {
            errors.push(format!("need gamma < 2 and nu < 1 - gamma/2 (gamma = {}, nu = {})", self.gamma, self.nu));
        }
        if self.sweeps.is_empty() || self.sweeps.iter().any(|s| s.sigmas.is_empty() || !(s.eps > 0.0)) {
            errors.push("sweeps must be non-empty with positive eps and non-empty sigma lists".into());
        }
        if self.paths == 0 || !(self.dt_over_eps > 0.0) || self.record_stride == 0 {
            errors.push("need paths > 0, dt_over_eps > 0 and record_stride > 0".into());
        }
        if self.dt_over_eps * self.record_stride as f64 > 0.1 + 1e-12 {
            errors.push("recording stride must be at most eps/10".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SpdeError::Config(errors.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi1Point {
    pub eps: f64,
    pub sigma: f64,
    /// `sup_t ‖φ₁‖_{C^{γ-1}}` over paths that stayed below the divergence guard.
    pub sup_norm: Summary,
    pub diverged: usize,
    /// `median / (σ(σ + ε))`.
    pub scaled_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRatio {
    pub eps: f64,
    pub sigma_from: f64,
    pub sigma_to: f64,
    /// Median ratio normalised to one doubling: `(m₁/m₀)^{1/log₂(σ₁/σ₀)}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi1Report {
    pub gamma: f64,
    pub nu: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub paths: usize,
    pub seed: u64,
    pub points: Vec<Phi1Point>,
    pub ratios: Vec<DoublingRatio>,
    /// Fit of `log(median / (σ(σ+ε)))` against `-log ε`; absent with one ε.
    pub nu_hat: Option<f64>,
    pub gates: Vec<Gate>,
}

impl Phi1Report {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Sup-norm samples of `φ₁` at one `(ε, σ)`; `None` marks a diverged path.
pub fn phi1_samples(cfg: &Phi1Config, eps: f64, sigma: f64, stream_offset: u64) -> Result<Vec<Option<f64>>> {
    let times = uniform_times(cfg.t_end, cfg.dt_over_eps * eps)?;
    let steps = times.len() - 1;
    let branch = find_equilibrium_branch(&cfg.drift, &times, cfg.branch_seed)?;
    if let Some(t) = branch.first_unstable_time() {
        return Err(SpdeError::Precondition(format!("equilibrium branch loses stability at t = {t}")));
    }
    let init = FourierField::constant(branch.roots[0], cfg.cutoff, cfg.grid)?;
    let track = deterministic_track(&cfg.drift, eps, &init, &times, TrackOptions::default())?;
    let shifted = times[..steps]
        .iter()
        .zip(&track.fields)
        .map(|(&t, phibar)| shifted_drift(&cfg.drift, &branch, t, phibar))
        .collect::<Result<Vec<_>>>()?;
    let model = OuModel::new(cfg.cutoff, cfg.grid, eps, sigma, branch.linearisation_path(), InitialLaw::Zero)?;
    let prop = Propagator::new(&model, &times)?;
    let stepper = Phi1Stepper::new(&model, &prop, shifted, cfg.guard)?;
    let record = record_steps(steps, cfg.record_stride);
    Ensemble::new(cfg.seed, cfg.threads)
        .map_offset(stream_offset, cfg.paths, |_, rng| -> Result<Option<f64>> {
            let mut st = model.initial_state(rng)?;
            let mut phi1 = FourierField::zeros(cfg.cutoff, cfg.grid)?;
            let mut sup = 0.0f64;
            for (i, tr) in prop.steps.iter().enumerate() {
                match stepper.step(i, &mut phi1, &st.psi, model.total_variance(&st)) {
                    Ok(()) => {}
                    Err(SpdeError::Divergence { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
                model.advance(&mut st, tr, rng);
                if record[i + 1] {
                    sup = sup.max(holder_norm_sampled(&phi1, cfg.gamma - 1.0, cfg.holder_grid)?);
                }
            }
            Ok(Some(sup))
        })?
        .into_iter()
        .collect()
}

/// Concentration of `φ₁ = φ - φ̄ - ψ` near a stable branch across (ε, σ) sweeps.
pub fn phi1_experiment(cfg: &Phi1Config) -> Result<Phi1Report> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut ratios = Vec::new();
    let mut gates = Vec::new();
    let mut offset = 0u64;
    for sweep in &cfg.sweeps {
        let mut medians = Vec::new();
        for &sigma in &sweep.sigmas {
            let samples = phi1_samples(cfg, sweep.eps, sigma, offset)?;
            offset += cfg.paths as u64;
            let ok: Vec<f64> = samples.iter().flatten().copied().collect();
            let diverged = samples.len() - ok.len();
            let summary = Summary::of(&ok);
            let scale = sigma * (sigma + sweep.eps);
            points.push(Phi1Point {
                eps: sweep.eps,
                sigma,
                sup_norm: summary,
                diverged,
                scaled_median: if scale > 0.0 { summary.median / scale } else { f64::NAN },
            });
            gates.push(Gate::new(
                format!("no divergence eps={} sigma={sigma}", sweep.eps),
                diverged == 0,
                diverged as f64,
                "diverged paths are excluded from the statistics",
            ));
            medians.push((sigma, summary.median));
        }
        for w in medians.windows(2) {
            let ((s0, m0), (s1, m1)) = (w[0], w[1]);
            if !(s0 > 0.0 && s1 > s0) {
                continue;
            }
            let ratio = (m1 / m0).powf(1.0 / (s1 / s0).log2());
            ratios.push(DoublingRatio { eps: sweep.eps, sigma_from: s0, sigma_to: s1, ratio });
            if let Some(target) = sweep.expected_ratio {
                gates.push(Gate::new(
                    format!("doubling ratio eps={} sigma {s0} -> {s1}", sweep.eps),
                    (ratio - target).abs() <= sweep.ratio_tolerance,
                    ratio,
                    format!("expected {target} +/- {}", sweep.ratio_tolerance),
                ));
            }
        }
    }
    let usable: Vec<&Phi1Point> = points.iter().filter(|p| p.scaled_median.is_finite() && p.scaled_median > 0.0).collect();
    let mut eps_values: Vec<f64> = usable.iter().map(|p| p.eps).collect();
    eps_values.sort_by(f64::total_cmp);
    eps_values.dedup();
    let nu_hat = if eps_values.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|p| -p.eps.ln()).collect();
        let y: Vec<f64> = usable.iter().map(|p| p.scaled_median.ln()).collect();
        linear_fit(&x, &y).map(|f| f.slope)
    } else {
        None
    };
    Ok(Phi1Report {
        gamma: cfg.gamma,
        nu: cfg.nu,
        t_end: cfg.t_end,
        cutoff: cfg.cutoff,
        grid: cfg.grid,
        paths: cfg.paths,
        seed: cfg.seed,
        points,
        ratios,
        nu_hat,
        gates,
    })
}

#[derive(Debug, Clone)]
pub struct Phi1PerpConfig {
    pub eps: f64,
    pub path: LinearisationPath,
    /// Spectral margin: `a(t) ≤ (2π)² - a₀` is required on the grid.
    pub a0: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub gamma: f64,
    pub holder_grid: usize,
    /// Sweep of scales `s`, with `σ = sigma_factor · s` and `H₀ = h0_factor · s`.
    pub scales: Vec<f64>,
    pub sigma_factor: f64,
    pub h0_factor: f64,
    pub paths: usize,
    pub dt: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub threads: usize,
    pub expected_exponent: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi1PerpPoint {
    pub scale: f64,
    pub sigma: f64,
    pub h0: f64,
    /// `h + H₀` with `h = σ`.
    pub x: f64,
    /// Sup norms up to `T ∧ τ₀(H₀)` over all paths (stopped paths censored at `τ₀`).
    pub censored: Summary,
    /// Sup norms over paths that reached `T` with `|φ₁⁰| ≤ H₀`.
    pub completed: Summary,
    pub stopped: usize,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phi1PerpReport {
    pub eps: f64,
    pub path: String,
    pub gamma: f64,
    pub points: Vec<Phi1PerpPoint>,
    /// Log-log slope of the censored medians against `h + H₀`.
    pub exponent: Option<f64>,
    /// Same slope with stopped paths dropped.
    pub exponent_completed: Option<f64>,
    pub gates: Vec<Gate>,
}

impl Phi1PerpReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Transverse part `φ₁^⊥` of the pitchfork system, stopped when the zero
/// mode leaves `[-H₀, H₀]`.
pub fn phi1perp_experiment(cfg: &Phi1PerpConfig) -> Result<Phi1PerpReport> {
    let times = uniform_times(cfg.t_end, cfg.dt)?;
    let limit = (2.0 * std::f64::consts::PI).powi(2) - cfg.a0;
    let worst = times.iter().map(|&t| cfg.path.value(t)).fold(f64::NEG_INFINITY, f64::max);
    if worst > limit {
        return Err(SpdeError::Precondition(format!("a(t) reaches {worst}, above (2 pi)^2 - a0 = {limit}")));
    }
    if cfg.scales.is_empty() || cfg.record_stride == 0 {
        return Err(SpdeError::Config("need a non-empty scale sweep and record_stride > 0".into()));
    }
    let steps = times.len() - 1;
    let record = record_steps(steps, cfg.record_stride);
    let mut points = Vec::new();
    for (si, &s) in cfg.scales.iter().enumerate() {
        let (sigma, h0) = (cfg.sigma_factor * s, cfg.h0_factor * s);
        let model = PitchforkModel::new(cfg.cutoff, cfg.grid, cfg.eps, sigma, cfg.path.clone())?;
        let sched = model.schedule(&times)?;
        let runs = Ensemble::new(cfg.seed, cfg.threads).map_offset(
            (si * cfg.paths) as u64,
            cfg.paths,
            |_, rng| -> Result<(f64, bool)> {
                let mut st = model.initial_state(0.0)?;
                let mut sup = 0.0f64;
                for i in 0..steps {
                    model.step(&sched, i, &mut st, rng)?;
                    if st.phi10.abs() > h0 {
                        return Ok((sup, true));
                    }
                    if record[i + 1] {
                        sup = sup.max(holder_norm_sampled(&st.perp, cfg.gamma - 1.0, cfg.holder_grid)?);
                    }
                }
                Ok((sup, false))
            },
        )?;
        let runs: Vec<(f64, bool)> = runs.into_iter().collect::<Result<_>>()?;
        let all: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let done: Vec<f64> = runs.iter().filter(|r| !r.1).map(|r| r.0).collect();
        points.push(Phi1PerpPoint {
            scale: s,
            sigma,
            h0,
            x: sigma + h0,
            censored: Summary::of(&all),
            completed: Summary::of(&done),
            stopped: runs.len() - done.len(),
            paths: runs.len(),
        });
    }
    let slope = |f: &dyn Fn(&Phi1PerpPoint) -> f64| -> Option<f64> {
        let pts: Vec<&Phi1PerpPoint> = points.iter().filter(|p| p.x > 0.0 && f(p) > 0.0).collect();
        if pts.len() < 2 {
            return None;
        }
        let x: Vec<f64> = pts.iter().map(|p| p.x.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| f(p).ln()).collect();
        linear_fit(&x, &y).map(|f| f.slope)
    };
    let exponent = slope(&|p| p.censored.median);
    let exponent_completed = slope(&|p| p.completed.median);
    let mut gates = Vec::new();
    if let Some((target, tol)) = cfg.expected_exponent {
        let e = exponent.unwrap_or(f64::NAN);
        gates.push(Gate::new("cubic scaling exponent", (e - target).abs() <= tol, e, format!("expected {target} +/- {tol}")));
    }
    Ok(Phi1PerpReport { eps: cfg.eps, path: cfg.path.describe(), gamma: cfg.gamma, points, exponent, exponent_completed, gates })
}
