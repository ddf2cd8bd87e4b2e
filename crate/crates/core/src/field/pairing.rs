//! Pairings with rescaled test functions `η_ρ^{(p)}(x) = ρ^{-2(1-1/p)} η(x/ρ)`.
//!
//! The test function is given on the centred cell `[-1/2, 1/2)²`. Because
//! fields are trigonometric polynomials, the pairing reduces to
//! `Σ_k φ_k w_k` with `w_k = ∫ η_ρ(x) e^{2πik·x} dx`; the weights are
//! computed once by periodic trapezoidal quadrature of `η`.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use super::FourierField;
use crate::error::{Result, SpdeError};

const BOUNDARY_SAMPLES: usize = 4096;
const QUADRATURE_POINTS: usize = 256;

/// Smooth bump `A (1 - r²/R²)²` on `r < R` with `R = 0.45`, normalised so
/// that `sup|η| + sup|∇η| = 1`.
pub fn bump(x1: f64, x2: f64) -> f64 {
    const R: f64 = 0.45;
    let r2 = (x1 * x1 + x2 * x2) / (R * R);
    if r2 >= 1.0 {
        return 0.0;
    }
    // sup|∇η| = 8A / (3√3 R), attained at r = R/√3.
    let grad = 8.0 / (3.0 * 3f64.sqrt() * R);
    let a = 1.0 / (1.0 + grad);
    a * (1.0 - r2) * (1.0 - r2)
}

/// Precomputed pairing weights for one `(η, ρ, p)` at a given cutoff.
#[derive(Debug, Clone)]
pub struct ScaledTest {
    n: usize,
    weights: Vec<Complex64>,
    rho: f64,
    p: f64,
}

impl ScaledTest {
    pub fn new(eta: impl Fn(f64, f64) -> f64, rho: f64, p: f64, n: usize) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(SpdeError::Precondition(format!("scale rho = {rho} not in (0, 1]")));
        }
        if !(p >= 2.0) {
            return Err(SpdeError::Precondition(format!("exponent p = {p} below 2")));
        }
        check_support(&eta)?;

        let g = QUADRATURE_POINTS;
        let y: Vec<f64> = (0..g).map(|i| -0.5 + i as f64 / g as f64).collect();
        let mut samples = vec![0.0; g * g];
        for (i, &y1) in y.iter().enumerate() {
            for (j, &y2) in y.iter().enumerate() {
                samples[i * g + j] = eta(y1, y2);
            }
        }
        let side = 2 * n + 1;
        // phase[k + n][i] = exp(2πi ρ k y_i)
        let phase: Vec<Vec<Complex64>> = (-(n as i64)..=n as i64)
            .map(|k| {
                y.iter()
                    .map(|&yi| Complex64::from_polar(1.0, 2.0 * PI * rho * k as f64 * yi))
                    .collect()
            })
            .collect();
        // partial[i][k2 + n] = Σ_j η(y_i, y_j) exp(2πi ρ k2 y_j)
        let mut partial = vec![Complex64::new(0.0, 0.0); g * side];
        for i in 0..g {
            for (b, ph) in phase.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..g {
                    acc += ph[j] * samples[i * g + j];
                }
                partial[i * side + b] = acc;
            }
        }
        let scale = rho.powf(2.0 / p) / (g * g) as f64;
        let mut weights = vec![Complex64::new(0.0, 0.0); side * side];
        for (a, ph) in phase.iter().enumerate() {
            for b in 0..side {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..g {
                    acc += ph[i] * partial[i * side + b];
                }
                weights[a * side + b] = acc * scale;
            }
        }
        Ok(Self { n, weights, rho, p })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    /// `⟨φ, η_ρ^{(p)}⟩` for a field whose cutoff does not exceed the one used
    /// to build the weights.
    pub fn pair(&self, field: &FourierField) -> f64 {
        assert!(field.cutoff() <= self.n, "field cutoff exceeds pairing weights");
        let side = 2 * self.n + 1;
        let n = self.n as i64;
        field
            .modes()
            .map(|k| {
                let w = self.weights[(k.k1 + n) as usize * side + (k.k2 + n) as usize];
                (field.coeff(k) * w).re
            })
            .sum()
    }
}

fn check_support(eta: &impl Fn(f64, f64) -> f64) -> Result<()> {
    let mut interior = 0.0f64;
    for i in 0..64 {
        for j in 0..64 {
            interior = interior.max(eta(-0.5 + (i as f64 + 0.5) / 64.0, -0.5 + (j as f64 + 0.5) / 64.0).abs());
        }
    }
    let mut edge = 0.0f64;
    for i in 0..=BOUNDARY_SAMPLES {
        let s = -0.5 + i as f64 / BOUNDARY_SAMPLES as f64;
        for (x1, x2) in [(s, -0.5), (s, 0.5), (-0.5, s), (0.5, s)] {
            edge = edge.max(eta(x1, x2).abs());
        }
    }
    if edge > 1e-9 * interior.max(f64::MIN_POSITIVE) {
        return Err(SpdeError::Precondition(
            "test function does not vanish on the boundary of the unit cell".into(),
        ));
    }
    Ok(())
}

/// One-off pairing `⟨φ, η_ρ^{(p)}⟩`.
pub fn pair_with_scaled_test(
    field: &FourierField,
    eta: impl Fn(f64, f64) -> f64,
    rho: f64,
    p: f64,
) -> Result<f64> {
    Ok(ScaledTest::new(eta, rho, p, field.cutoff())?.pair(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::to_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump_integral() -> f64 {
        // ∫ A(1 - r²/R²)² dx = A π R² / 3
        let r: f64 = 0.45;
        let grad = 8.0 / (3.0 * 3f64.sqrt() * r);
        PI * r * r / 3.0 / (1.0 + grad)
    }

    #[test]
    fn bump_has_unit_c1_norm() {
        let r: f64 = 0.45;
        let grad = 8.0 / (3.0 * 3f64.sqrt() * r);
        let a = 1.0 / (1.0 + grad);
        assert!((bump(0.0, 0.0) - a).abs() < 1e-15);
        // finite-difference gradient maximum
        let h = 1e-6;
        let mut gmax = 0.0f64;
        for i in 1..2000 {
            let x = i as f64 * r / 2000.0;
            gmax = gmax.max(((bump(x + h, 0.0) - bump(x - h, 0.0)) / (2.0 * h)).abs());
        }
        assert!((a + gmax - 1.0).abs() < 1e-5);
    }

    #[test]
    fn zero_field_pairs_to_zero() {
        let f = FourierField::zeros(6, 16).unwrap();
        assert_eq!(pair_with_scaled_test(&f, bump, 0.25, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_at_p_infinity_is_scale_invariant() {
        let e0 = FourierField::constant(1.0, 4, 16).unwrap();
        for rho in [1.0, 0.5, 0.125] {
            let v = pair_with_scaled_test(&e0, bump, rho, f64::INFINITY).unwrap();
            assert!((v - bump_integral()).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn matches_fine_grid_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = FourierField::random(6, 512, &mut rng, |_| 1.0).unwrap();
        let rho = 0.5;
        let g = to_grid(&f);
        let m = 512;
        let mut direct = 0.0;
        for i in 0..m {
            for j in 0..m {
                let wrap = |v: f64| if v >= 0.5 { v - 1.0 } else { v };
                let x1 = wrap(i as f64 / m as f64);
                let x2 = wrap(j as f64 / m as f64);
                direct += g[i * m + j] * bump(x1 / rho, x2 / rho) / rho;
            }
        }
        direct /= (m * m) as f64;
        let v = pair_with_scaled_test(&f, bump, rho, 2.0).unwrap();
        assert!((v - direct).abs() < 1e-6 * (1.0 + direct.abs()), "{v} vs {direct}");
    }

    #[test]
    fn rejects_test_function_touching_boundary() {
        let e0 = FourierField::constant(1.0, 2, 8).unwrap();
        let wide = |x1: f64, x2: f64| (1.0 - 4.0 * x1 * x1) * (1.0 - x2 * x2);
        assert!(matches!(
            pair_with_scaled_test(&e0, wide, 0.5, 2.0),
            Err(SpdeError::Precondition(_))
        ));
    }
}
