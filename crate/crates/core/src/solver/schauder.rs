use crate::error::{Result, SpdeError};
use crate::field::{aggregate, max_annulus, FourierField};

fn heat_besov(g: &FourierField, t: f64, beta: f64) -> f64 {
    let mut sums = vec![0.0; max_annulus(g.cutoff()) as usize + 1];
    for k in g.modes() {
        sums[k.annulus() as usize] += (-2.0 * k.eigenvalue() * t).exp() * g.coeff(k).norm_sqr();
    }
    aggregate(sums.into_iter().enumerate().map(|(q, s)| (q as f64 * beta).exp2() * s.sqrt()), f64::INFINITY)
}

/// `sup_t ‖e^{tΔ} g‖_{B^β_{2,∞}} t^{(β-α)/2} / ‖g‖_{B^α_{2,∞}}` over `times ⊂ (0, 1]`.
pub fn schauder_check(g: &FourierField, alpha: f64, beta: f64, times: &[f64]) -> Result<f64> {
    if beta > alpha + 2.0 {
        return Err(SpdeError::Precondition(format!("need beta <= alpha + 2 (alpha = {alpha}, beta = {beta})")));
    }
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(SpdeError::Precondition("time grid must be non-empty and lie in (0, 1]".into()));
    }
    let base = heat_besov(g, 0.0, alpha);
    if !(base > 0.0) || !base.is_finite() {
        return Err(SpdeError::Precondition("g must be non-zero and finite".into()));
    }
    let gamma = 0.5 * (beta - alpha);
    Ok(times.iter().map(|&t| heat_besov(g, t, beta) * t.powf(gamma) / base).fold(0.0, f64::max))
}
