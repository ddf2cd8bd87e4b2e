use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spde_core::field::{from_grid, modes_in_ball};
use spde_core::wick::*;
use spde_core::{FourierField, ModeIndex};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Explicit sum `Σ_ℓ (-1)^ℓ n!/(2^ℓ ℓ!(n-2ℓ)!) C^ℓ x^{n-2ℓ}` in floating point.
fn hermite_explicit(n: usize, x: f64, c: f64) -> f64 {
    (0..=n / 2)
        .map(|l| {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n) / (2f64.powi(l as i32) * factorial(l) * factorial(n - 2 * l))
                * c.powi(l as i32)
                * x.powi((n - 2 * l) as i32)
        })
        .sum()
}

fn random_field(n: usize, m: usize, seed: u64, scale: f64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FourierField::random(n, m, &mut rng, |k| scale / (1.0 + k.norm_sq() as f64)).unwrap()
}

#[test]
fn low_degree_closed_forms() {
    for &(x, c) in &[(0.3, 0.7), (-2.0, 1.5), (1.1, 0.0)] {
        assert_eq!(hermite(0, x, c), 1.0);
        assert_eq!(hermite(1, x, c), x);
        assert!((hermite(2, x, c) - (x * x - c)).abs() < 1e-14);
        assert!((hermite(3, x, c) - (x * x * x - 3.0 * c * x)).abs() < 1e-13);
        assert!((hermite(4, x, c) - (x.powi(4) - 6.0 * c * x * x + 3.0 * c * c)).abs() < 1e-12);
    }
}

#[test]
fn coefficients_are_exact_integers() {
    let h = hermite_coeffs(6).unwrap();
    assert_eq!(h.a, vec![1, -15, 45, -15]);
    assert_eq!(h.b, vec![1, 15, 45, 15]);
    assert!(hermite_coeffs(60).is_err());
}

#[test]
fn zero_variance_gives_monomials() {
    for m in 0..8 {
        assert!((hermite(m, 1.7, 0.0) - 1.7f64.powi(m as i32)).abs() < 1e-12);
    }
}

#[test]
fn orthogonality_under_the_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = 0.8;
    for n in 0..4 {
        for m in 0..4 {
            let e = wick_moment_mc(n, m, c, c, c, 200_000, &mut rng).unwrap();
            let want = if n == m { factorial(n) * c.powi(n as i32) } else { 0.0 };
            assert!(e.agrees_with(want, 4.5, 1e-12), "n={n} m={m}: {e:?} vs {want}");
        }
    }
}

#[test]
fn correlated_moment_identity() {
    // E[H_n(X; C1) H_n(Y; C2)] = n! ρ^n with ρ = Cov(X, Y).
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (c1, c2, rho) = (1.0, 0.5, 0.4);
    for n in 1..4 {
        let e = wick_moment_mc(n, n, rho, c1, c2, 200_000, &mut rng).unwrap();
        assert!(e.agrees_with(factorial(n) * rho.powi(n as i32), 4.5, 1e-12), "{n}: {e:?}");
    }
    assert!(wick_moment_mc(1, 1, 2.0, 1.0, 1.0, 20_000, &mut rng).is_err());
    assert!(wick_moment_mc(1, 1, 0.0, 1.0, 1.0, 10, &mut rng).is_err());
}

#[test]
fn generating_function_converges() {
    for &(t, x, c) in &[(0.5f64, 0.2f64, 1.0f64), (-1.0, 1.5, 0.3), (0.8, -0.7, 2.0)] {
        let exact: f64 = (t * x - 0.5 * c * t * t).exp();
        assert!((hermite_generating_sum(t, x, c, 40) - exact).abs() < 1e-12 * exact.max(1.0));
    }
}

#[test]
fn renormalisation_constant_matches_direct_sum() {
    let sigma = 0.7;
    let at_zero = RenormConstant::new(0, sigma);
    assert!((at_zero.value - sigma * sigma / 2.0).abs() < 1e-15);
    for n in [1usize, 5, 16] {
        let c = RenormConstant::new(n, sigma);
        let pi2 = (2.0 * std::f64::consts::PI).powi(2);
        let direct: f64 = modes_in_ball(n)
            .map(|k| sigma * sigma / (2.0 * (pi2 * k.norm_sq() as f64 + 1.0)))
            .sum();
        assert!((c.value - direct).abs() < 1e-13 * direct);
        assert!((c.annulus.iter().sum::<f64>() - c.value).abs() < 1e-15 * c.value);
    }
}

#[test]
fn renormalisation_constant_grows_logarithmically() {
    // Increments over doublings approach σ²/(4π) · log 2.
    let sigma = 1.0;
    let c: Vec<f64> = [256usize, 512, 1024].iter().map(|&n| RenormConstant::new(n, sigma).value).collect();
    let slope = (c[2] - c[1]) / 2f64.ln();
    let want = sigma * sigma / (4.0 * std::f64::consts::PI);
    assert!((slope - want).abs() < 0.02 * want, "{slope} vs {want}");
    assert!(c[1] - c[0] > 0.0);
}

#[test]
fn wick_power_of_constant_field() {
    let f = FourierField::constant(0.9, 3, 32).unwrap();
    for m in 1..=4 {
        let w = wick_power_field(&f, m, 0.4).unwrap();
        assert!((w.mean() - hermite_explicit(m, 0.9, 0.4)).abs() < 1e-13);
        assert!(w.sub(&FourierField::constant(w.mean(), 3, 32).unwrap()).l2_norm() < 1e-13);
    }
}

#[test]
fn wick_power_requires_alias_free_grid() {
    let f = FourierField::zeros(4, 16).unwrap();
    assert!(wick_power_field(&f, 3, 1.0).is_err());
    assert!(wick_power_field(&f, 2, 1.0).is_ok());
    assert!(wick_power_field(&FourierField::zeros(4, 12).unwrap(), 2, 1.0).is_err());
    assert!(wick_power_field(&FourierField::zeros(4, 13).unwrap(), 2, 1.0).is_ok());
}

#[test]
fn wick_powers_batch_matches_single() {
    let f = random_field(4, 32, 5, 0.3);
    let all = wick_powers_field(&f, 5, 0.2).unwrap();
    for (j, w) in all.iter().enumerate() {
        let single = wick_power_field(&f, j + 1, 0.2).unwrap();
        assert!(w.sub(&single).l2_norm() < 1e-13, "{j}");
    }
}

#[test]
fn field_binomial_identity() {
    let (n, m) = (4, 32);
    let f = random_field(n, m, 1, 0.2);
    let g = random_field(n, m, 2, 0.1);
    let (c1, c2) = (0.05, 0.03);
    for deg in 1..=4 {
        let lhs = wick_power_field(&f.add(&g), deg, c1 + c2).unwrap();
        let (gf, gg) = (f.to_grid(), g.to_grid());
        let pointwise: Vec<f64> = gf
            .iter()
            .zip(&gg)
            .map(|(&x, &y)| {
                let mut b = 1.0;
                let mut s = 0.0;
                for j in 0..=deg {
                    s += b * hermite_explicit(j, x, c1) * hermite_explicit(deg - j, y, c2);
                    b = b * (deg - j) as f64 / (j + 1) as f64;
                }
                s
            })
            .collect();
        let rhs = from_grid(&pointwise, n, m);
        assert!(lhs.sub(&rhs).l2_norm() < 1e-10 * (1.0 + lhs.l2_norm()), "{deg}");
    }
}

#[test]
fn multinomial_over_annuli_matches_direct_power() {
    for n in [4usize, 8, 16] {
        let m = (4 * n + n + 1).next_power_of_two();
        let f = random_field(n, m, n as u64, 0.05);
        let rc = RenormConstant::new(n, 0.3);
        for deg in 2..=4 {
            let direct = wick_power_field(&f, deg, rc.value).unwrap();
            let blocks = wick_multinomial_blocks(&f, deg, &rc.annulus, rc.value).unwrap();
            assert!(direct.sub(&blocks).l2_norm() < 1e-8, "N={n} m={deg}");
        }
    }
}

#[test]
fn multinomial_checks_the_variance_table() {
    let f = random_field(4, 32, 0, 0.1);
    let rc = RenormConstant::new(4, 0.3);
    assert!(wick_multinomial_blocks(&f, 2, &rc.annulus, rc.value * 1.01).is_err());
    assert!(wick_multinomial_blocks(&f, 2, &rc.annulus[..2], rc.value).is_err());
}

#[test]
fn compositions_count() {
    // C(m + len - 1, len - 1)
    assert_eq!(compositions(3, 4).len(), 20);
    assert_eq!(compositions(0, 3), vec![vec![0, 0, 0]]);
    assert!(compositions(3, 4).iter().all(|c| c.iter().sum::<usize>() == 3));
}

#[test]
fn stationary_variance_formula() {
    let k = ModeIndex::new(1, 2);
    let mu = 5.0 * (2.0 * std::f64::consts::PI).powi(2);
    assert!((stationary_variance(0.5, k) - 0.25 / (2.0 * (mu + 1.0))).abs() < 1e-18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn recursion_matches_expanded_coefficients(m in 0usize..=10, x in -4.0f64..4.0, c in 0.0f64..3.0) {
        let h = hermite_coeffs(m).unwrap();
        let (v, scale) = h.eval(x, c);
        prop_assert!((hermite(m, x, c) - v).abs() <= 1e-10 * scale.max(1e-300));
        prop_assert!((hermite(m, x, c) - hermite_explicit(m, x, c)).abs() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn scaling_relation(m in 0usize..=10, x in -3.0f64..3.0, c in 0.01f64..3.0, s in 0.1f64..3.0) {
        // H_m(s x; s² C) = s^m H_m(x; C)
        let lhs = hermite(m, s * x, s * s * c);
        let rhs = s.powi(m as i32) * hermite(m, x, c);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn scalar_binomial(n in 0usize..=10, x in -2.0f64..2.0, y in -2.0f64..2.0, c1 in 0.0f64..2.0, c2 in 0.0f64..2.0) {
        let lhs = hermite(n, x + y, c1 + c2);
        let rhs = wick_binomial(n, x, y, c1, c2);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn basis_change_round_trip(p in proptest::collection::vec(-50i64..50, 1..12)) {
        let h = monomial_to_hermite(&p).unwrap();
        prop_assert_eq!(hermite_to_monomial(&h).unwrap(), p);
    }

    #[test]
    fn hermite_all_is_consistent(x in -3.0f64..3.0, c in 0.0f64..2.0) {
        let mut out = vec![0.0; 9];
        hermite_all(x, c, &mut out);
        for (m, v) in out.iter().enumerate() {
            prop_assert_eq!(*v, hermite(m, x, c));
        }
    }
}
