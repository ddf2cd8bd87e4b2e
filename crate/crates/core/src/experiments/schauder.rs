use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::common::Gate;
use crate::error::{Result, SpdeError};
use crate::field::{FourierField, ModeIndex};
use crate::solver::schauder_check;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchauderConfig {
    pub alpha: f64,
    pub beta: f64,
    pub cutoff: usize,
    pub grid: usize,
    /// Log-spaced sample count on `[t_min, 1]`; the refined grid doubles it.
    pub times: usize,
    pub t_min: f64,
    /// Allowed relative change of `M̂` under refinement.
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchauderReport {
    pub alpha: f64,
    pub beta: f64,
    pub cutoff: usize,
    pub m_coarse: f64,
    pub m_fine: f64,
    pub relative_change: f64,
    /// Single-mode case against its closed form.
    pub single_mode: ModeIndex,
    pub single_computed: f64,
    pub single_closed_form: f64,
    pub gates: Vec<Gate>,
}

impl SchauderReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

pub fn log_times(count: usize, t_min: f64) -> Vec<f64> {
    let lo = t_min.ln();
    (0..count).map(|i| (lo * (1.0 - i as f64 / (count - 1).max(1) as f64)).exp()).collect()
}

/// Empirical constant `M̂ = sup_t t^{(β-α)/2} ‖e^{tΔ}g‖_{B^β} / ‖g‖_{B^α}` on
/// a random field, its stability under time-grid refinement, and the
/// single-mode case with a closed form.
pub fn schauder_probe(cfg: &SchauderConfig) -> Result<SchauderReport> {
    if cfg.times < 2 || !(cfg.t_min > 0.0 && cfg.t_min < 1.0) || cfg.cutoff == 0 {
        return Err(SpdeError::Config("need times >= 2, t_min in (0, 1) and cutoff >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Mean-zero: the zero mode is invariant under the heat flow and would pin
    // the supremum at t = 1.
    let mut g = FourierField::random(cfg.cutoff, cfg.grid, &mut rng, |k| 1.0 / (1.0 + k.norm_sq() as f64))?;
    g.set(ModeIndex::ZERO, Complex64::new(0.0, 0.0));
    let m_coarse = schauder_check(&g, cfg.alpha, cfg.beta, &log_times(cfg.times, cfg.t_min))?;
    let m_fine = schauder_check(&g, cfg.alpha, cfg.beta, &log_times(2 * cfg.times, cfg.t_min))?;
    let relative_change = (m_coarse / m_fine - 1.0).abs();

    // A single mode of annulus q gives 2^{q(β-α)} sup_t t^{(β-α)/2} e^{-μ_k t}.
    let k = ModeIndex::new(cfg.cutoff as i64, 0);
    let single = FourierField::from_modes(cfg.cutoff, cfg.grid, &[(k, Complex64::new(0.5, 0.25))])?;
    let grid = log_times(cfg.times, cfg.t_min);
    let d = cfg.beta - cfg.alpha;
    let closed = grid
        .iter()
        .map(|&t| (k.annulus() as f64 * d).exp2() * (-k.eigenvalue() * t).exp() * t.powf(0.5 * d))
        .fold(0.0, f64::max);
    let computed = schauder_check(&single, cfg.alpha, cfg.beta, &grid)?;
    let gates = vec![
        Gate::new(
            "refinement-stable constant",
            m_coarse.is_finite() && m_fine.is_finite() && relative_change <= cfg.tolerance,
            relative_change,
            format!("M = {m_coarse:.6e} at {} times, {m_fine:.6e} at {}", cfg.times, 2 * cfg.times),
        ),
        Gate::new(
            "single-mode closed form",
            (computed - closed).abs() <= 1e-8 * closed,
            (computed - closed).abs() / closed,
            "relative error",
        ),
    ];
    Ok(SchauderReport {
        alpha: cfg.alpha,
        beta: cfg.beta,
        cutoff: cfg.cutoff,
        m_coarse,
        m_fine,
        relative_change,
        single_mode: k,
        single_computed: computed,
        single_closed_form: closed,
        gates,
    })
}
