//! Lebesgue, Besov, Hölder and Sobolev norms.
//!
//! Block norms `‖δ_q φ‖_{L^p}` are evaluated on the field's physical grid:
//! the grid mean of `|δ_q φ|^p` for finite `p` (a rectangle rule, exact for
//! `p = 2` and `O(M^-2)` accurate otherwise) and the grid maximum for
//! `p = ∞`. Spectral helpers compute the `p = 2` case from coefficients.

use super::{max_annulus, to_grid, FourierField};
use crate::error::{Result, SpdeError};

/// Lower equivalence constant: `H1_BESOV_LOWER · ‖φ‖_{B^1_{2,2}} ≤ ‖φ‖_{H¹}`.
///
/// For `k ∈ A_q`, `q ≥ 1`, the weight `1 + (2π)²‖k‖²` lies between
/// `(π²/2)·2^{2q}` and `(4π² + 1)·2^{2q}`; `A_0` has weight one on both sides.
pub const H1_BESOV_LOWER: f64 = 1.0;
/// Upper equivalence constant: `‖φ‖_{H¹} ≤ H1_BESOV_UPPER · ‖φ‖_{B^1_{2,2}}`.
pub const H1_BESOV_UPPER: f64 = 6.362_265_131_567_328; // sqrt(4π² + 1)

pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |acc, v| acc.max(v.abs()));
    }
    let mean = values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64;
    mean.powf(1.0 / p)
}

/// `ℓ^r` aggregation of a sequence.
pub fn aggregate(values: impl IntoIterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.into_iter().fold(0.0, f64::max)
    } else {
        values.into_iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

fn check_exponents(p: f64, r: f64) -> Result<()> {
    if !(p >= 1.0) || !(r >= 1.0) {
        return Err(SpdeError::Precondition(format!(
            "Besov exponents must satisfy p, r >= 1 (got p = {p}, r = {r})"
        )));
    }
    Ok(())
}

fn check_finite(field: &FourierField) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(SpdeError::Numeric("field has non-finite coefficients".into()))
    }
}

/// `‖δ_q φ‖_{L²}` for `q = 0..=q_max`, from coefficients.
pub fn block_l2_norms(field: &FourierField) -> Vec<f64> {
    let mut sums = vec![0.0; max_annulus(field.cutoff()) as usize + 1];
    for k in field.modes() {
        sums[k.annulus() as usize] += field.coeff(k).norm_sqr();
    }
    sums.into_iter().map(f64::sqrt).collect()
}

/// `‖δ_q φ‖_{L^∞}` approximated by the maximum over a `grid × grid` mesh.
pub fn block_sup_norms(field: &FourierField, grid: usize) -> Result<Vec<f64>> {
    let f = field.with_grid_size(grid)?;
    Ok((0..=max_annulus(field.cutoff()))
        .map(|q| {
            if q == 0 {
                f.mean().abs()
            } else {
                lp_norm(&to_grid(&f.annulus_project(q)), f64::INFINITY)
            }
        })
        .collect())
}

fn block_lp_norms(field: &FourierField, p: f64) -> Vec<f64> {
    (0..=max_annulus(field.cutoff()))
        .map(|q| lp_norm(&to_grid(&field.annulus_project(q)), p))
        .collect()
}

/// `‖φ‖_{B^α_{p,r}} = ‖(2^{qα} ‖δ_q φ‖_{L^p})_q‖_{ℓ^r}` with block norms
/// taken on the physical grid.
pub fn besov_norm(field: &FourierField, alpha: f64, p: f64, r: f64) -> Result<f64> {
    check_exponents(p, r)?;
    check_finite(field)?;
    let blocks = block_lp_norms(field, p);
    Ok(aggregate(weighted(blocks, alpha), r))
}

/// Spectral evaluation of `‖φ‖_{B^α_{2,r}}` by Parseval on each block.
pub fn besov_norm_l2(field: &FourierField, alpha: f64, r: f64) -> Result<f64> {
    check_exponents(2.0, r)?;
    check_finite(field)?;
    Ok(aggregate(weighted(block_l2_norms(field), alpha), r))
}

fn weighted(blocks: Vec<f64>, alpha: f64) -> impl Iterator<Item = f64> {
    blocks
        .into_iter()
        .enumerate()
        .map(move |(q, b)| (q as f64 * alpha).exp2() * b)
}

/// `C^α = B^α_{∞,∞}`.
pub fn holder_norm(field: &FourierField, alpha: f64) -> Result<f64> {
    besov_norm(field, alpha, f64::INFINITY, f64::INFINITY)
}

/// `C^α` norm with block sup norms sampled on a `grid × grid` mesh.
pub fn holder_norm_sampled(field: &FourierField, alpha: f64, grid: usize) -> Result<f64> {
    check_finite(field)?;
    Ok(aggregate(weighted(block_sup_norms(field, grid)?, alpha), f64::INFINITY))
}

/// Dyadic Sobolev norm `(Σ_q 2^{2qs} Σ_{k∈A_q} |φ_k|²)^{1/2}`.
pub fn dyadic_sobolev_norm(field: &FourierField, s: f64) -> f64 {
    field
        .modes()
        .map(|k| (2.0 * s * k.annulus() as f64).exp2() * field.coeff(k).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `(Σ_k (1 + (2π)²‖k‖²) |φ_k|²)^{1/2}`.
pub fn h1_norm(field: &FourierField) -> f64 {
    field
        .modes()
        .map(|k| (1.0 + k.eigenvalue()) * field.coeff(k).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ModeIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    fn cosine(n: usize, m: usize) -> FourierField {
        FourierField::from_modes(n, m, &[(ModeIndex::new(1, 0), Complex64::new(1.0, 0.0))]).unwrap()
    }

    #[test]
    fn unit_constant_has_unit_norm() {
        let e0 = FourierField::constant(1.0, 4, 16).unwrap();
        for alpha in [-1.0, 0.0, 0.7] {
            for p in [1.0, 2.0, 3.5, f64::INFINITY] {
                let v = besov_norm(&e0, alpha, p, f64::INFINITY).unwrap();
                assert!((v - 1.0).abs() < 1e-14);
            }
        }
        assert!((h1_norm(&e0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_block_cosine() {
        let f = cosine(4, 16);
        for alpha in [-0.5, 0.0, 1.5] {
            let v = besov_norm(&f, alpha, 2.0, f64::INFINITY).unwrap();
            assert!((v - alpha.exp2() * 2f64.sqrt()).abs() < 1e-13);
        }
        let h1 = h1_norm(&f);
        assert!((h1 - (2.0 + 2.0 * 4.0 * PI * PI).sqrt()).abs() < 1e-12);
        let sup = holder_norm(&f, 0.0).unwrap();
        assert!((sup - 2.0).abs() < 1e-13);
    }

    #[test]
    fn l2_l2_matches_dyadic_sobolev() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = FourierField::random(16, 64, &mut rng, |_| 1.0).unwrap();
        for s in [-1.0, 0.3, 1.0] {
            let a = besov_norm(&f, s, 2.0, 2.0).unwrap();
            let b = dyadic_sobolev_norm(&f, s);
            assert!((a - b).abs() / b < 1e-8);
        }
    }

    #[test]
    fn h1_equivalence_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let f = FourierField::random(20, 41, &mut rng, |k| (k.l1() as f64 + 1.0).powi(-3)).unwrap();
            let b = dyadic_sobolev_norm(&f, 1.0);
            let h = h1_norm(&f);
            assert!(H1_BESOV_LOWER * b <= h * (1.0 + 1e-12));
            assert!(h <= H1_BESOV_UPPER * b * (1.0 + 1e-12));
        }
        assert!((H1_BESOV_UPPER - (4.0 * PI * PI + 1.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn non_finite_is_a_numeric_error() {
        let mut f = FourierField::constant(1.0, 2, 8).unwrap();
        f.set(ModeIndex::new(1, 0), Complex64::new(f64::NAN, 0.0));
        assert!(matches!(besov_norm(&f, 0.0, 2.0, 2.0), Err(SpdeError::Numeric(_))));
    }

    #[test]
    fn block_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = FourierField::random(16, 40, &mut rng, |_| 1.0).unwrap();
        let blocks = besov_norm(&f, 0.0, 2.0, 2.0).unwrap();
        assert!((blocks * blocks - f.l2_norm_sq()).abs() / f.l2_norm_sq() < 1e-10);
    }
}
