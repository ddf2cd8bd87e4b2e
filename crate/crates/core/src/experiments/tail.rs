use std::io::Write;

use serde::{Deserialize, Serialize};

use super::common::{auto_thresholds, exceedance_curve, fit_rate, fmt, uniform_times, ExceedancePoint, FitStatus, Gate, RateFit};
use crate::convolution::{InitialLaw, LinearisationPath, OuModel, Propagator};
use crate::error::{Result, SpdeError};
use crate::field::besov_norm_l2;
use crate::parallel::Ensemble;
use crate::wick::wick_powers_field;

pub const TAIL_HEADER: &str = "sup over t is the maximum over the sampling grid (stride <= eps/10); \
the continuum supremum is larger, so exceedance probabilities are biased low";

#[derive(Debug, Clone)]
pub struct TailConfig {
    pub eps: f64,
    pub sigma: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub path: LinearisationPath,
    pub init: InitialLaw,
    pub m_max: usize,
    pub alphas: Vec<f64>,
    /// Thresholds `h` shared by every `(m, α)`; chosen per curve when absent.
    pub h_grid: Option<Vec<f64>>,
    pub thresholds: usize,
    pub paths: usize,
    /// Sampling stride of the supremum in time.
    pub dt: f64,
    pub seed: u64,
    pub threads: usize,
    pub min_r_squared: f64,
}

impl TailConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.paths < 1000 {
            errors.push(format!("tail experiments need at least 1000 paths (got {})", self.paths));
        }
        if !(self.dt > 0.0 && self.dt <= self.eps / 10.0 * (1.0 + 1e-12)) {
            errors.push(format!("sampling stride {} must lie in (0, eps/10]", self.dt));
        }
        if self.m_max == 0 || self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a < 0.0)) {
            errors.push("need m_max >= 1 and a non-empty list of negative alphas".into());
        }
        if let Some(h) = &self.h_grid {
            if h.is_empty() || h.iter().any(|&x| !(x > 0.0)) {
                errors.push("h grid must be non-empty and positive".into());
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SpdeError::Config(errors.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub m: usize,
    pub alpha: f64,
    pub points: Vec<ExceedancePoint>,
    pub fit: RateFit,
    /// `P̂` non-increasing in `h` up to the interval widths.
    pub monotone: bool,
    /// Largest observed `(sup_t ‖:ψ^m:‖)^{1/m}`.
    pub max_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub header: String,
    pub eps: f64,
    pub sigma: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub path: String,
    pub init: InitialLaw,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub curves: Vec<TailCurve>,
    pub gates: Vec<Gate>,
}

impl TailReport {
    pub fn curve(&self, m: usize, alpha: f64) -> Option<&TailCurve> {
        self.curves.iter().find(|c| c.m == m && c.alpha == alpha)
    }

    /// Columns `m, alpha, h, x, exceedances, paths, p_hat, lo, hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,alpha,h,x,exceedances,paths,p_hat,lo,hi")?;
        for c in &self.curves {
            for p in &c.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    c.m,
                    fmt(c.alpha),
                    fmt(p.h),
                    fmt(p.x),
                    p.exceedances,
                    p.paths,
                    fmt(p.p_hat),
                    fmt(p.lo),
                    fmt(p.hi)
                )?;
            }
        }
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// `sup_t ‖:ψ(t)^m:‖_{B^α_{2,∞}}` per path, indexed `[(m - 1) * |alphas| + i]`.
pub fn tail_statistics(cfg: &TailConfig) -> Result<Vec<Vec<f64>>> {
    let model = OuModel::new(cfg.cutoff, cfg.grid, cfg.eps, cfg.sigma, cfg.path.clone(), cfg.init)?;
    let times = uniform_times(cfg.t_end, cfg.dt)?;
    let prop = Propagator::new(&model, &times)?;
    let width = cfg.m_max * cfg.alphas.len();
    let runs = Ensemble::new(cfg.seed, cfg.threads).map(cfg.paths, |_, rng| -> Result<Vec<f64>> {
        let mut st = model.initial_state(rng)?;
        let mut sup = vec![0.0f64; width];
        let mut observe = |st: &crate::convolution::ConvolutionState| -> Result<()> {
            let powers = wick_powers_field(&st.psi, cfg.m_max, model.total_variance(st))?;
            for (m, w) in powers.iter().enumerate() {
                for (i, &a) in cfg.alphas.iter().enumerate() {
                    let s = &mut sup[m * cfg.alphas.len() + i];
                    *s = s.max(besov_norm_l2(w, a, f64::INFINITY)?);
                }
            }
            Ok(())
        };
        observe(&st)?;
        for tr in &prop.steps {
            model.advance(&mut st, tr, rng);
            observe(&st)?;
        }
        Ok(sup)
    })?;
    runs.into_iter().collect()
}

fn monotone(points: &[ExceedancePoint]) -> bool {
    points.windows(2).all(|w| w[1].h <= w[0].h || w[1].p_hat <= w[0].hi)
}

/// Empirical tails of `sup_t ‖:ψ^m:‖_{B^α_{2,∞}}` with exceedance of `h^m`,
/// and fitted rates `κ̂_m(α)` of `-log P̂` against `h²/σ²`.
pub fn tail_experiment(cfg: &TailConfig) -> Result<TailReport> {
    cfg.validate()?;
    let stats = tail_statistics(cfg)?;
    let mut curves = Vec::new();
    for m in 1..=cfg.m_max {
        for (i, &alpha) in cfg.alphas.iter().enumerate() {
            let idx = (m - 1) * cfg.alphas.len() + i;
            let values: Vec<f64> = stats.iter().map(|s| s[idx].powf(1.0 / m as f64)).collect();
            let h_grid = match &cfg.h_grid {
                Some(h) => h.clone(),
                None => auto_thresholds(&values, 0.3, cfg.thresholds),
            };
            let points = exceedance_curve(&values, &h_grid, cfg.sigma);
            let fit = fit_rate(&points);
            let max_observed = values.iter().copied().fold(0.0, f64::max);
            curves.push(TailCurve { m, alpha, monotone: monotone(&points), fit, points, max_observed });
        }
    }
    let mut gates = Vec::new();
    for c in &curves {
        let name = format!("linearity m={} alpha={}", c.m, c.alpha);
        gates.push(match c.fit.status {
            FitStatus::Ok => Gate::new(
                name,
                c.fit.r_squared > cfg.min_r_squared,
                c.fit.r_squared,
                format!("R^2 over {} points, h in [{:.4e}, {:.4e}]", c.fit.points, c.fit.h_min, c.fit.h_max),
            ),
            status => Gate::new(name, false, f64::NAN, format!("no fit: {status:?}")),
        });
    }
    for &alpha in &cfg.alphas {
        let kappas: Vec<f64> = (1..=cfg.m_max).map(|m| curves.iter().find(|c| c.m == m && c.alpha == alpha).unwrap().fit.kappa).collect();
        let ok = kappas.iter().all(|k| k.is_finite()) && kappas.windows(2).all(|w| w[1] <= w[0]);
        gates.push(Gate::new(
            format!("kappa non-increasing in m, alpha={alpha}"),
            ok,
            kappas.last().copied().unwrap_or(f64::NAN),
            format!("kappa = {kappas:?}"),
        ));
    }
    Ok(TailReport {
        header: TAIL_HEADER.into(),
        eps: cfg.eps,
        sigma: cfg.sigma,
        t_end: cfg.t_end,
        cutoff: cfg.cutoff,
        grid: cfg.grid,
        path: cfg.path.describe(),
        init: cfg.init,
        paths: cfg.paths,
        dt: cfg.dt,
        seed: cfg.seed,
        curves,
        gates,
    })
}
