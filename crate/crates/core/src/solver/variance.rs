use crate::convolution::{InitialLaw, LinearisationPath, OuModel, Propagator};
use crate::error::Result;

/// Variance of the linear zero-mode SDE `ε dx = a(t) x dt + σ √ε dW`:
/// `v°(t) = v°(0) e^{2α(t,0)/ε} + (σ²/ε) ∫_0^t e^{2α(t,s)/ε} ds`,
/// accumulated exactly over the intervals of `times` (starting at `times[0]`).
pub fn linear_variance_profile(path: &LinearisationPath, eps: f64, sigma: f64, v0: f64, times: &[f64]) -> Result<Vec<f64>> {
    let model = OuModel::new(0, 1, eps, sigma, path.clone(), InitialLaw::Zero)?;
    let prop = Propagator::new(&model, times)?;
    let mut v = v0;
    let mut out = Vec::with_capacity(times.len());
    out.push(v);
    for tr in &prop.steps {
        v = tr.decay[0] * tr.decay[0] * v + tr.innovation[0];
        out.push(v);
    }
    Ok(out)
}

/// Regime of `t` relative to the crossing `t*`, at scale `√ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceRegime {
    Before,
    Window,
    After,
}

/// Leading-order size of `v°(t)`: `σ²/|t - t*|` before the window,
/// `σ²/√ε` inside it and `(σ²/√ε) e^{2α(t,t*)/ε}` after it.
pub fn variance_asymptotic(path: &LinearisationPath, eps: f64, sigma: f64, t_star: f64, t: f64) -> (VarianceRegime, f64) {
    let s2 = sigma * sigma;
    let w = eps.sqrt();
    if t < t_star - w {
        (VarianceRegime::Before, s2 / (t_star - t))
    } else if t <= t_star + w {
        (VarianceRegime::Window, s2 / w)
    } else {
        (VarianceRegime::After, s2 / w * (2.0 * path.alpha(t, t_star) / eps).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_profile_is_flat() {
        let sigma = 0.3;
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let v = linear_variance_profile(&LinearisationPath::Constant(-1.0), 0.05, sigma, sigma * sigma / 2.0, &times).unwrap();
        for x in v {
            assert!((x - sigma * sigma / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn crossing_regimes_within_factor_two() {
        let (sigma, t_star) = (1e-3, 0.5);
        let path = LinearisationPath::crossing(t_star);
        for eps in [1e-2f64, 1e-3] {
            for (t, regime) in [(t_star, VarianceRegime::Window), (t_star + 2.0 * eps.sqrt(), VarianceRegime::After)] {
                let times: Vec<f64> = (0..=400).map(|i| t * i as f64 / 400.0).collect();
                let v = *linear_variance_profile(&path, eps, sigma, sigma * sigma, &times).unwrap().last().unwrap();
                let (r, reference) = variance_asymptotic(&path, eps, sigma, t_star, t);
                assert_eq!(r, regime);
                let ratio = v / reference;
                assert!((0.5..=2.0).contains(&ratio), "eps {eps} t {t}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn profile_is_grid_independent() {
        let path = LinearisationPath::crossing(0.5);
        let coarse: Vec<f64> = (0..=10).map(|i| i as f64 * 0.07).collect();
        let fine: Vec<f64> = (0..=70).map(|i| i as f64 * 0.01).collect();
        let a = linear_variance_profile(&path, 0.01, 0.1, 0.0, &coarse).unwrap();
        let b = linear_variance_profile(&path, 0.01, 0.1, 0.0, &fine).unwrap();
        let (x, y) = (a.last().unwrap(), b.last().unwrap());
        assert!((x - y).abs() < 1e-8 * y.abs(), "{x} vs {y}");
    }
}
