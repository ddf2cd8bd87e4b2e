use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SpdeError};
use crate::quadrature;

/// Slowly varying linearisation `a(t)` with antiderivative access.
#[derive(Clone)]
pub enum LinearisationPath {
    Constant(f64),
    /// `a(t) = offset + slope · t`
    Affine { offset: f64, slope: f64 },
    /// `a(t) = Σ_j c_j t^j`
    Polynomial(Vec<f64>),
    /// Piecewise-linear interpolation, held constant outside the table.
    /// `cumulative[i] = ∫_{times[0]}^{times[i]} a`.
    Tabulated { times: Vec<f64>, values: Vec<f64>, cumulative: Arc<Vec<f64>> },
    /// Arbitrary path; integrals use adaptive quadrature.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for LinearisationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

pub const CUSTOM_TOLERANCE: f64 = 1e-10;

impl LinearisationPath {
    /// Pitchfork family `a(t) = t - t*`.
    pub fn crossing(t_star: f64) -> Self {
        LinearisationPath::Affine { offset: -t_star, slope: 1.0 }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(SpdeError::Precondition("tabulated path needs matching, non-empty tables".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpdeError::Precondition("tabulated path times must increase".into()));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            cumulative.push(cumulative[i - 1] + 0.5 * (values[i - 1] + values[i]) * (times[i] - times[i - 1]));
        }
        Ok(LinearisationPath::Tabulated { times, values, cumulative: Arc::new(cumulative) })
    }

    pub fn describe(&self) -> String {
        match self {
            LinearisationPath::Constant(a) => format!("constant({a})"),
            LinearisationPath::Affine { offset, slope } => format!("affine({offset} + {slope} t)"),
            LinearisationPath::Polynomial(c) => format!("polynomial({c:?})"),
            LinearisationPath::Tabulated { times, .. } => format!("tabulated({} nodes)", times.len()),
            LinearisationPath::Custom(_) => "custom".into(),
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            LinearisationPath::Constant(a) => Some(*a),
            _ => None,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            LinearisationPath::Constant(a) => *a,
            LinearisationPath::Affine { offset, slope } => offset + slope * t,
            LinearisationPath::Polynomial(c) => c.iter().rev().fold(0.0, |acc, cj| acc * t + cj),
            LinearisationPath::Tabulated { times, values, .. } => {
                let i = times.partition_point(|&s| s <= t);
                if i == 0 {
                    values[0]
                } else if i == times.len() {
                    values[times.len() - 1]
                } else {
                    let w = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    values[i - 1] + w * (values[i] - values[i - 1])
                }
            }
            LinearisationPath::Custom(f) => f(t),
        }
    }

    /// `∫_0^t a` for the families with closed forms.
    fn primitive(&self, t: f64) -> Option<f64> {
        match self {
            LinearisationPath::Constant(a) => Some(a * t),
            LinearisationPath::Affine { offset, slope } => Some(offset * t + 0.5 * slope * t * t),
            LinearisationPath::Polynomial(c) => Some(
                c.iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (j, cj)| acc * t + cj / (j + 1) as f64)
                    * t,
            ),
            LinearisationPath::Tabulated { times, values, cumulative } => {
                let p = |x: f64| tabulated_antiderivative(times, values, cumulative, x);
                Some(p(t) - p(0.0))
            }
            LinearisationPath::Custom(_) => None,
        }
    }

    /// `α(t, t1) = ∫_{t1}^t a(s) ds`.
    pub fn alpha(&self, t: f64, t1: f64) -> f64 {
        match self.primitive(t).zip(self.primitive(t1)) {
            Some((a, b)) => a - b,
            None => {
                let f = |s: f64| self.value(s);
                if t >= t1 {
                    quadrature::integrate(f, t1, t, CUSTOM_TOLERANCE)
                } else {
                    -quadrature::integrate(f, t, t1, CUSTOM_TOLERANCE)
                }
            }
        }
    }

    /// Upper bound of `a` on `[t0, t1]` (exact for the linear families,
    /// sampled otherwise).
    pub fn max_on(&self, t0: f64, t1: f64) -> f64 {
        match self {
            LinearisationPath::Constant(a) => *a,
            LinearisationPath::Affine { .. } => self.value(t0).max(self.value(t1)),
            LinearisationPath::Tabulated { times, values, .. } => {
                let lo = times.partition_point(|&s| s <= t0);
                let hi = times.partition_point(|&s| s < t1).max(lo);
                let inner = values[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                inner.max(self.value(t0)).max(self.value(t1))
            }
            _ => (0..=64)
                .map(|i| self.value(t0 + (t1 - t0) * i as f64 / 64.0))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Checks `a(t) ≤ -a_minus` on every grid point.
    pub fn check_stable(&self, a_minus: f64, grid: &[f64]) -> Result<()> {
        for &t in grid {
            let a = self.value(t);
            if a > -a_minus {
                return Err(SpdeError::Precondition(format!(
                    "linearisation a({t}) = {a} violates the stability margin {a_minus}"
                )));
            }
        }
        Ok(())
    }
}

/// `∫_{times[0]}^x` of the clamped interpolant, O(log n).
fn tabulated_antiderivative(times: &[f64], values: &[f64], cumulative: &[f64], x: f64) -> f64 {
    let n = times.len();
    if x <= times[0] {
        return values[0] * (x - times[0]);
    }
    if x >= times[n - 1] {
        return cumulative[n - 1] + values[n - 1] * (x - times[n - 1]);
    }
    let i = times.partition_point(|&s| s <= x);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (x - t0) / (t1 - t0);
    let vx = values[i - 1] + w * (values[i] - values[i - 1]);
    cumulative[i - 1] + 0.5 * (values[i - 1] + vx) * (x - t0)
}
