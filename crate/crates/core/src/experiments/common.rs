use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpdeError};
use crate::stats::{median, quantile, weighted_linear_fit, wilson_interval, WILSON_Z};

/// A named pass/fail outcome with the measured value behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl Gate {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, detail: detail.into() }
    }
}

/// One row of an empirical tail curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedancePoint {
    pub h: f64,
    /// Fit abscissa, `h² / σ²`.
    pub x: f64,
    pub exceedances: u64,
    pub paths: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// No point had `10 / paths ≤ P̂ ≤ 0.5`.
    EmptyRange,
    /// Fewer than three admissible points.
    TooFewPoints,
}

/// Weighted least-squares fit of `-log P̂` against `h² / σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub status: FitStatus,
    pub kappa: f64,
    pub intercept: f64,
    pub kappa_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
    pub h_min: f64,
    pub h_max: f64,
}

/// Tail curve of `values` (one statistic per path) at the thresholds `h`.
/// A path exceeds `h` when its value is strictly greater.
pub fn exceedance_curve(values: &[f64], h_grid: &[f64], sigma: f64) -> Vec<ExceedancePoint> {
    let n = values.len() as u64;
    h_grid
        .iter()
        .map(|&h| {
            let k = values.iter().filter(|&&v| v > h).count() as u64;
            let (lo, hi) = wilson_interval(k, n, WILSON_Z);
            ExceedancePoint { h, x: h * h / (sigma * sigma), exceedances: k, paths: n, p_hat: k as f64 / n as f64, lo, hi }
        })
        .collect()
}

/// Thresholds spread evenly in `h²` between the `q_lo` quantile and the
/// maximum of `values`.
pub fn auto_thresholds(values: &[f64], q_lo: f64, count: usize) -> Vec<f64> {
    if values.is_empty() || count == 0 {
        return Vec::new();
    }
    let lo = quantile(values, q_lo);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![lo];
    }
    (0..count)
        .map(|i| (lo * lo + (hi * hi - lo * lo) * i as f64 / (count - 1).max(1) as f64).sqrt())
        .collect()
}

/// Fits over the admissible range `10 / paths ≤ P̂ ≤ 0.5`, weighting each
/// point by the inverse square of its Wilson half-width on the log scale.
pub fn fit_rate(points: &[ExceedancePoint]) -> RateFit {
    let admissible: Vec<&ExceedancePoint> = points
        .iter()
        .filter(|p| p.paths > 0 && p.p_hat >= 10.0 / p.paths as f64 && p.p_hat <= 0.5)
        .collect();
    let empty = |status| RateFit {
        status,
        kappa: f64::NAN,
        intercept: f64::NAN,
        kappa_stderr: f64::NAN,
        r_squared: f64::NAN,
        points: admissible.len(),
        h_min: admissible.first().map_or(f64::NAN, |p| p.h),
        h_max: admissible.last().map_or(f64::NAN, |p| p.h),
    };
    if admissible.is_empty() {
        return empty(FitStatus::EmptyRange);
    }
    let x: Vec<f64> = admissible.iter().map(|p| p.x).collect();
    let y: Vec<f64> = admissible.iter().map(|p| -p.p_hat.ln()).collect();
    let w: Vec<f64> = admissible
        .iter()
        .map(|p| {
            let half = 0.5 * (p.hi.ln() - p.lo.ln());
            1.0 / (half * half)
        })
        .collect();
    if admissible.len() < 3 {
        return empty(FitStatus::TooFewPoints);
    }
    match weighted_linear_fit(&x, &y, &w) {
        Some(fit) => RateFit {
            status: FitStatus::Ok,
            kappa: fit.slope,
            intercept: fit.intercept,
            kappa_stderr: fit.slope_stderr,
            r_squared: fit.r_squared,
            points: fit.points,
            h_min: admissible.iter().map(|p| p.h).fold(f64::INFINITY, f64::min),
            h_max: admissible.iter().map(|p| p.h).fold(f64::NEG_INFINITY, f64::max),
        },
        None => empty(FitStatus::TooFewPoints),
    }
}

/// Median together with the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
    pub samples: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { median: f64::NAN, q25: f64::NAN, q75: f64::NAN, max: f64::NAN, samples: 0 };
        }
        Self {
            median: median(values),
            q25: quantile(values, 0.25),
            q75: quantile(values, 0.75),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            samples: values.len(),
        }
    }
}

/// Uniform grid `0, Δt, …, T` with `Δt ≤ dt_max`.
pub fn uniform_times(t_end: f64, dt_max: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && dt_max > 0.0) {
        return Err(SpdeError::Config(format!("need T > 0 and dt > 0 (T = {t_end}, dt = {dt_max})")));
    }
    let steps = (t_end / dt_max - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=steps).map(|i| t_end * i as f64 / steps as f64).collect())
}

/// Every `stride`-th step index plus the last one.
pub fn record_steps(steps: usize, stride: usize) -> Vec<bool> {
    (0..=steps).map(|i| i % stride.max(1) == 0 || i == steps).collect()
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| SpdeError::Format(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

pub(crate) fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}
