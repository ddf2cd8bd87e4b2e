use serde::{Deserialize, Serialize};

use super::common::{uniform_times, Gate, Summary};
use crate::convolution::LinearisationPath;
use crate::error::{Result, SpdeError};
use crate::parallel::Ensemble;
use crate::solver::{linear_variance_profile, PitchforkModel};
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TubeConvention {
    /// `|φ₁⁰| ≤ (h₋/σ) √v°(t)`.
    SqrtVariance,
    /// `|φ₁⁰| ≤ (h₋/σ) v°(t)`, the formula read literally.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitConfig {
    pub eps: f64,
    pub t_star: f64,
    pub t_end: f64,
    /// May contain `0` as the deterministic control.
    pub sigmas: Vec<f64>,
    /// `h₋ = h_minus_factor · σ`.
    pub h_minus_factor: f64,
    pub tube: TubeConvention,
    pub cutoff: usize,
    pub grid: usize,
    pub paths: usize,
    pub dt: f64,
    pub survival_points: usize,
    pub seed: u64,
    pub threads: usize,
    /// Allowed relative spread of the scaled delays.
    pub delay_tolerance: f64,
    /// Allowed factor between the window fluctuation size and `σ ε^{-1/4}`.
    pub fluctuation_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSeries {
    pub sigma: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    pub paths: usize,
    /// Exits from `B₋` before `t* + √ε`.
    pub minus_exits: usize,
    pub minus_censored: usize,
    pub minus_survival: Vec<SurvivalPoint>,
    /// Exits from `B₊` before `T`, measured after `t* + √ε`.
    pub plus_exits: usize,
    pub plus_censored: usize,
    /// `τ_{B₊} - t*` over uncensored paths.
    pub delay: Summary,
    /// `median(τ_{B₊} - t*) / √(ε log σ⁻¹)`.
    pub scaled_delay: f64,
    /// Root mean square of `φ₁⁰(t* + √ε)`.
    pub window_sd: f64,
    pub window_sd_stderr: f64,
    /// `window_sd / (σ ε^{-1/4})`.
    pub window_ratio: f64,
    /// `√v°(t* + √ε) / (σ ε^{-1/4})` from the linear variance profile.
    pub linear_ratio: f64,
    /// Half the time step: the first-crossing bias bound.
    pub time_resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitReport {
    pub eps: f64,
    pub t_star: f64,
    pub t_end: f64,
    pub tube: TubeConvention,
    pub cutoff: usize,
    pub dt: f64,
    pub seed: u64,
    pub series: Vec<ExitSeries>,
    pub gates: Vec<Gate>,
}

impl ExitReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

struct PathOutcome {
    tau_minus: Option<f64>,
    tau_plus: Option<f64>,
    window_value: f64,
}

/// Linear interpolation of the first up-crossing of `g` between two steps.
fn crossing(t0: f64, g0: f64, t1: f64, g1: f64) -> f64 {
    if g1 == g0 {
        return t1;
    }
    (t0 + (t1 - t0) * (-g0) / (g1 - g0)).clamp(t0, t1)
}

fn run_series(cfg: &ExitConfig, index: usize, sigma: f64, times: &[f64]) -> Result<ExitSeries> {
    let path = LinearisationPath::crossing(cfg.t_star);
    let model = PitchforkModel::new(cfg.cutoff, cfg.grid, cfg.eps, sigma, path.clone())?;
    let sched = model.schedule(times)?;
    let v = linear_variance_profile(&path, cfg.eps, sigma, 0.0, times)?;
    let h_minus = cfg.h_minus_factor * sigma;
    let h_plus = if sigma > 0.0 { sigma * (1.0 / sigma).ln().max(0.0).sqrt() } else { 0.0 };
    let t_window = cfg.t_star + cfg.eps.sqrt();
    let tube: Vec<f64> = v
        .iter()
        .map(|&v| match cfg.tube {
            _ if sigma == 0.0 => 0.0,
            TubeConvention::SqrtVariance => cfg.h_minus_factor * v.sqrt(),
            TubeConvention::Literal => h_minus / sigma * v,
        })
        .collect();
    let outer = |t: f64| {
        let a = path.value(t);
        if a > 0.0 {
            h_plus / a.sqrt()
        } else {
            f64::INFINITY
        }
    };
    let steps = times.len() - 1;
    let outcomes = Ensemble::new(cfg.seed, cfg.threads).map_offset(
        (index * cfg.paths) as u64,
        cfg.paths,
        |_, rng| -> Result<PathOutcome> {
            let mut st = model.initial_state(0.0)?;
            let mut out = PathOutcome { tau_minus: None, tau_plus: None, window_value: 0.0 };
            let mut prev = 0.0f64;
            for i in 0..steps {
                model.step(&sched, i, &mut st, rng)?;
                let (t0, t1) = (times[i], times[i + 1]);
                let x = st.phi10;
                if t0 < t_window && t1 >= t_window {
                    out.window_value = prev + (x - prev) * (t_window - t0) / (t1 - t0);
                }
                if out.tau_minus.is_none() && t0 < t_window {
                    let (g0, g1) = (prev.abs() - tube[i], x.abs() - tube[i + 1]);
                    if g1 > 0.0 {
                        out.tau_minus = Some(crossing(t0, g0.min(0.0), t1, g1).min(t_window));
                    }
                }
                if t1 >= t_window {
                    let g1 = x.abs() - outer(t1);
                    if g1 > 0.0 {
                        let g0 = if t0 >= t_window { prev.abs() - outer(t0) } else { -1.0 };
                        let t0c = t0.max(t_window);
                        out.tau_plus = Some(crossing(t0c, g0.min(0.0), t1, g1));
                        break;
                    }
                }
                prev = x;
            }
            Ok(out)
        },
    )?;
    let outcomes: Vec<PathOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let n = outcomes.len();
    let minus: Vec<f64> = outcomes.iter().filter_map(|o| o.tau_minus).collect();
    let delays: Vec<f64> = outcomes.iter().filter_map(|o| o.tau_plus).map(|t| t - cfg.t_star).collect();
    let survival = (0..cfg.survival_points.max(2))
        .map(|j| {
            let t = t_window * j as f64 / (cfg.survival_points.max(2) - 1) as f64;
            let alive = n - minus.iter().filter(|&&tau| tau <= t).count();
            SurvivalPoint { t, survival: alive as f64 / n as f64 }
        })
        .collect();
    let delay = Summary::of(&delays);
    let log_scale = if sigma > 0.0 && sigma < 1.0 { (cfg.eps * (1.0 / sigma).ln()).sqrt() } else { f64::NAN };
    let sq: Moments = outcomes.iter().map(|o| o.window_value * o.window_value).collect();
    let window_sd = sq.mean().sqrt();
    let window_sd_stderr = if window_sd > 0.0 { sq.stderr() / (2.0 * window_sd) } else { 0.0 };
    let reference = sigma * cfg.eps.powf(-0.25);
    let v_window = linear_variance_profile(&path, cfg.eps, sigma, 0.0, &[0.0, t_window])?[1];
    Ok(ExitSeries {
        sigma,
        h_minus,
        h_plus,
        paths: n,
        minus_exits: minus.len(),
        minus_censored: n - minus.len(),
        minus_survival: survival,
        plus_exits: delays.len(),
        plus_censored: n - delays.len(),
        scaled_delay: delay.median / log_scale,
        delay,
        window_sd,
        window_sd_stderr,
        window_ratio: if reference > 0.0 { window_sd / reference } else { f64::NAN },
        linear_ratio: if reference > 0.0 { v_window.sqrt() / reference } else { f64::NAN },
        time_resolution: 0.5 * (times[1] - times[0]),
    })
}

/// Exit times of the zero mode from the tubes `B₋` (before the bifurcation
/// window) and `B₊` (after it) near a pitchfork with `a(t) = t - t*`.
pub fn pitchfork_exit_experiment(cfg: &ExitConfig) -> Result<ExitReport> {
    if cfg.sigmas.is_empty() || cfg.paths == 0 {
        return Err(SpdeError::Config("need a non-empty sigma sweep and paths > 0".into()));
    }
    if !(cfg.t_star + cfg.eps.sqrt() < cfg.t_end) {
        return Err(SpdeError::Config("t* + sqrt(eps) must lie before T".into()));
    }
    let times = uniform_times(cfg.t_end, cfg.dt)?;
    let series = cfg
        .sigmas
        .iter()
        .enumerate()
        .map(|(i, &s)| run_series(cfg, i, s, &times))
        .collect::<Result<Vec<_>>>()?;
    let mut gates = Vec::new();
    for s in &series {
        if s.minus_exits + s.minus_censored != s.paths || s.plus_exits + s.plus_censored != s.paths {
            return Err(SpdeError::Numeric("censoring bookkeeping is inconsistent".into()));
        }
        if s.sigma == 0.0 {
            gates.push(Gate::new(
                "deterministic control: no exit before T",
                s.plus_exits == 0 && s.minus_exits == 0,
                s.plus_exits as f64,
                "full delay expected with sigma = 0",
            ));
        } else {
            let f = cfg.fluctuation_factor;
            gates.push(Gate::new(
                format!("window fluctuation sigma={}", s.sigma),
                s.window_ratio >= 1.0 / f && s.window_ratio <= f,
                s.window_ratio,
                format!("sd / (sigma eps^-1/4), allowed [1/{f}, {f}]; linear theory gives {:.4}", s.linear_ratio),
            ));
        }
    }
    let noisy: Vec<&ExitSeries> = series.iter().filter(|s| s.sigma > 0.0).collect();
    if noisy.len() >= 2 {
        let refused: Vec<f64> = noisy.iter().filter(|s| 2 * s.plus_exits < s.paths).map(|s| s.sigma).collect();
        if !refused.is_empty() {
            gates.push(Gate::new(
                "delay scaling",
                false,
                f64::NAN,
                format!("fit refused: fewer than 50% uncensored paths at sigma = {refused:?}"),
            ));
        } else {
            let r: Vec<f64> = noisy.iter().map(|s| s.scaled_delay).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let spread = r.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / mean;
            gates.push(Gate::new(
                "delay scaling",
                spread <= cfg.delay_tolerance,
                spread,
                format!("scaled delays {r:?}, max relative deviation from mean"),
            ));
        }
    }
    Ok(ExitReport {
        eps: cfg.eps,
        t_star: cfg.t_star,
        t_end: cfg.t_end,
        tube: cfg.tube,
        cutoff: cfg.cutoff,
        dt: times[1] - times[0],
        seed: cfg.seed,
        series,
        gates,
    })
}
