use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use spde_core::field::*;
use spde_core::{FourierField, ModeIndex};

fn random_field(n: usize, m: usize, seed: u64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FourierField::random(n, m, &mut rng, |k| 1.0 / (1.0 + k.norm_sq() as f64)).unwrap()
}

/// Direct synthesis `Σ_k φ_k e^{2πi k·x}` at `x = (i/M, j/M)`.
fn naive_value(f: &FourierField, i: usize, j: usize) -> f64 {
    let m = f.grid_size() as f64;
    let (x1, x2) = (i as f64 / m, j as f64 / m);
    f.modes()
        .map(|k| {
            let phase = 2.0 * PI * (k.k1 as f64 * x1 + k.k2 as f64 * x2);
            (f.coeff(k) * Complex64::from_polar(1.0, phase)).re
        })
        .sum()
}

#[test]
fn grid_values_match_direct_synthesis() {
    let f = random_field(3, 8, 1);
    let g = f.to_grid();
    let m = f.grid_size();
    for i in 0..m {
        for j in 0..m {
            let v = naive_value(&f, i, j);
            assert!((g[i * m + j] - v).abs() < 1e-12, "({i},{j}) {} vs {v}", g[i * m + j]);
        }
    }
}

#[test]
fn analysis_matches_direct_projection() {
    let (n, m) = (3, 8);
    let values: Vec<f64> = (0..m * m).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
    let f = from_grid(&values, n, m);
    for k in modes_in_ball(n) {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let phase = -2.0 * PI * (k.k1 as f64 * i as f64 + k.k2 as f64 * j as f64) / m as f64;
                acc += Complex64::from_polar(values[i * m + j], phase);
            }
        }
        acc /= (m * m) as f64;
        assert!((f.coeff(k) - acc).norm() < 1e-12, "{k:?}");
    }
}

#[test]
fn ball_has_expected_size_and_annuli() {
    for n in [0usize, 1, 4, 9] {
        assert_eq!(modes_in_ball(n).count(), 2 * n * n + 2 * n + 1);
    }
    assert_eq!(ModeIndex::ZERO.annulus(), 0);
    assert_eq!(ModeIndex::new(1, 0).annulus(), 1);
    assert_eq!(ModeIndex::new(1, 1).annulus(), 2);
    assert_eq!(ModeIndex::new(-2, 1).annulus(), 2);
    assert_eq!(ModeIndex::new(4, 0).annulus(), 3);
    assert_eq!(max_annulus(8), 4);
}

#[test]
fn grid_must_resolve_the_cutoff() {
    assert!(FourierField::zeros(4, 8).is_err());
    assert!(FourierField::zeros(4, 9).is_ok());
}

#[test]
fn single_mode_norms() {
    // φ = 2 cos(2π x1) has φ_{±(1,0)} = 1.
    let f = FourierField::from_modes(2, 8, &[(ModeIndex::new(1, 0), Complex64::new(1.0, 0.0))]).unwrap();
    assert!((f.l2_norm_sq() - 2.0).abs() < 1e-14);
    let mu = 4.0 * PI * PI;
    assert!((h1_norm(&f) - (2.0 * (1.0 + mu)).sqrt()).abs() < 1e-12);
    // only annulus 1 is occupied
    let alpha = -0.5;
    let b = besov_norm_l2(&f, alpha, 2.0).unwrap();
    assert!((b - alpha.exp2() * 2f64.sqrt()).abs() < 1e-12);
    let h = holder_norm(&f, alpha).unwrap();
    assert!((h - alpha.exp2() * 2.0).abs() < 1e-12);
    let hs = holder_norm_sampled(&f, alpha, 64).unwrap();
    assert!((hs - h).abs() < 1e-12);
}

#[test]
fn h1_and_dyadic_besov_are_equivalent() {
    for seed in 0..20 {
        let f = random_field(9, 32, seed);
        let h1 = h1_norm(&f);
        let b = besov_norm_l2(&f, 1.0, 2.0).unwrap();
        assert!(H1_BESOV_LOWER * b <= h1 * (1.0 + 1e-12));
        assert!(h1 <= H1_BESOV_UPPER * b * (1.0 + 1e-12));
    }
}

#[test]
fn besov_norm_on_grid_agrees_with_spectral_for_p2() {
    let f = random_field(7, 32, 3);
    for (alpha, r) in [(-0.5, 2.0), (0.3, f64::INFINITY), (1.0, 1.0)] {
        let a = besov_norm(&f, alpha, 2.0, r).unwrap();
        let b = besov_norm_l2(&f, alpha, r).unwrap();
        assert!((a - b).abs() < 1e-10 * b, "{alpha} {r}");
    }
}

#[test]
fn rejects_bad_exponents_and_nonfinite_fields() {
    let mut f = random_field(2, 8, 0);
    assert!(besov_norm(&f, 0.0, 0.5, 2.0).is_err());
    f.set(ModeIndex::new(1, 0), Complex64::new(f64::NAN, 0.0));
    assert!(besov_norm_l2(&f, 0.0, 2.0).is_err());
}

#[test]
fn container_round_trip() {
    let f = random_field(5, 16, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    write_field_file(&f, &path).unwrap();
    let g = read_field_file(&path).unwrap();
    assert_eq!(f, g);
}

#[test]
fn container_rejects_corruption() {
    let f = random_field(2, 8, 7);
    let mut bytes = Vec::new();
    write_container(&f, &mut bytes).unwrap();
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(read_container(bad.as_slice()).is_err());
    assert!(read_container(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn pairing_with_a_constant_picks_the_bump_mass() {
    // ⟨1, η_ρ⟩ = ρ^{2/p - 2} ∫ η(x/ρ) dx = ρ^{2/p} ∫ η.
    let f = FourierField::constant(1.0, 4, 16).unwrap();
    let h = 1e-3;
    let mass: f64 = {
        let g = (1.0 / h) as i64;
        let mut s = 0.0;
        for i in 0..g {
            for j in 0..g {
                s += bump(-0.5 + (i as f64 + 0.5) * h, -0.5 + (j as f64 + 0.5) * h);
            }
        }
        s * h * h
    };
    for (rho, p) in [(1.0, 2.0), (0.5, 2.0), (0.25, 4.0)] {
        let v = pair_with_scaled_test(&f, bump, rho, p).unwrap();
        let want = rho.powf(2.0 / p) * mass;
        assert!((v - want).abs() < 1e-4 * want, "{rho} {p}: {v} vs {want}");
    }
}

#[test]
fn pairing_rejects_bad_scales() {
    let f = FourierField::zeros(2, 8).unwrap();
    assert!(pair_with_scaled_test(&f, bump, 0.0, 2.0).is_err());
    assert!(pair_with_scaled_test(&f, bump, 0.5, 1.0).is_err());
    assert!(pair_with_scaled_test(&f, |_, _| 1.0, 0.5, 2.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthesis_then_analysis_is_identity(seed in any::<u64>(), n in 1usize..8) {
        let m = (2 * n + 2).next_power_of_two();
        let f = random_field(n, m, seed);
        let g = from_grid(&f.to_grid(), n, m);
        prop_assert!(f.sub(&g).l2_norm() < 1e-12 * (1.0 + f.l2_norm()));
    }

    #[test]
    fn parseval_on_the_grid(seed in any::<u64>(), n in 1usize..8) {
        let f = random_field(n, 32, seed);
        let g = f.to_grid();
        let mean_sq = g.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        prop_assert!((mean_sq - f.l2_norm_sq()).abs() < 1e-12 * (1.0 + mean_sq));
    }

    #[test]
    fn random_fields_are_real(seed in any::<u64>()) {
        let f = random_field(6, 16, seed);
        prop_assert!(f.reality_defect() < 1e-15);
        let g = f.to_grid();
        prop_assert!((g.iter().sum::<f64>() / g.len() as f64 - f.mean()).abs() < 1e-12);
    }

    #[test]
    fn annulus_blocks_partition_the_field(seed in any::<u64>()) {
        let f = random_field(9, 32, seed);
        let mut sum = FourierField::zeros(9, 32).unwrap();
        for q in 0..=max_annulus(9) {
            sum = sum.add(&f.annulus_project(q));
        }
        prop_assert!(sum.sub(&f).l2_norm() < 1e-14);
        let blocks = block_l2_norms(&f);
        let total: f64 = blocks.iter().map(|b| b * b).sum();
        prop_assert!((total - f.l2_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn norms_are_homogeneous(seed in any::<u64>(), s in -5.0f64..5.0) {
        let f = random_field(5, 16, seed);
        let g = f.scaled(s);
        let a = besov_norm_l2(&f, -0.5, 2.0).unwrap();
        let b = besov_norm_l2(&g, -0.5, 2.0).unwrap();
        prop_assert!((b - s.abs() * a).abs() < 1e-12 * (1.0 + a));
        let h1 = h1_norm(&g);
        prop_assert!((h1 - s.abs() * h1_norm(&f)).abs() < 1e-10 * (1.0 + h1));
    }

    #[test]
    fn resizing_keeps_low_modes(seed in any::<u64>()) {
        let f = random_field(4, 16, seed);
        let up = f.resized(8, 32).unwrap();
        prop_assert!(up.galerkin_project(4).resized(4, 16).unwrap().sub(&f).l2_norm() < 1e-14);
    }
}
