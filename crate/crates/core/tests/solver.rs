use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use spde_core::convolution::{ConvolutionState, InitialLaw, LinearisationPath, OuModel, Propagator};
use spde_core::field::{from_grid, h1_norm, FourierField, ModeIndex};
use spde_core::parallel::Ensemble;
use spde_core::quadrature::phi1;
use spde_core::solver::*;
use spde_core::stats::{variance_about_zero, Moments};
use spde_core::wick::hermite;
use spde_core::SpdeError;

fn uniform(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect()
}

fn random_field(n: usize, m: usize, scale: f64, seed: u64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FourierField::random(n, m, &mut rng, |k| scale / (1.0 + k.norm_sq() as f64)).unwrap()
}

#[test]
fn shifted_drift_of_constant_field() {
    let f = DriftPolynomial::cubic_fixture();
    let times = uniform(1.0, 4);
    let branch = find_equilibrium_branch(&f, &times, 1.0).unwrap();
    let t = times[2];
    let star = branch.root_at(t);
    let phibar = FourierField::constant(star, 4, 32).unwrap();
    let sd = shifted_drift(&f, &branch, t, &phibar).unwrap();
    let a3 = f.coefficient(3, t);
    assert!(sd.a_hat(1).l2_norm() < 1e-12);
    assert!((sd.a_hat(2).mean() - (3.0 * a3 * star + f.coefficient(2, t))).abs() < 1e-12);
    assert!((sd.a_hat(3).mean() - a3).abs() < 1e-15);
    assert!(sd.a_hat(2).is_spatially_constant());
    assert!(matches!(shifted_drift(&f, &branch, 0.3, &phibar), Err(SpdeError::Precondition(_))));
}

#[test]
fn shifted_drift_binomial_reconstruction() {
    let f = DriftPolynomial::new(vec![
        Coefficient::Constant(0.4),
        Coefficient::Constant(-0.7),
        Coefficient::Constant(0.3),
        Coefficient::Constant(0.2),
        Coefficient::Constant(0.1),
        Coefficient::Constant(-1.5),
    ])
    .unwrap();
    let (n, m) = (4, 64);
    let phibar = random_field(n, m, 0.4, 1).add(&FourierField::constant(0.8, n, m).unwrap());
    let phi0 = random_field(n, m, 0.6, 2);
    let (star, c) = (0.9, 0.37);
    let a = f.d_phi(0.0, star);
    let sd = shifted_drift_at(&f, 0.0, star, a, &phibar).unwrap();
    let coeffs = f.coefficients_at(0.0);
    let (pb, p0) = (phibar.to_grid(), phi0.to_grid());
    for (x, (&u, &v)) in pb.iter().zip(&p0).enumerate() {
        let lhs: f64 = a * v
            + (1..=5).map(|j| shifted_coefficients(&coeffs, u, star)[j - 1] * hermite(j, v, c)).sum::<f64>();
        let rhs: f64 = (0..=5).map(|i| coeffs[i] * (hermite(i, u + v, c) - u.powi(i as i32))).sum();
        assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()), "point {x}: {lhs} vs {rhs}");
    }
    // the field coefficients interpolate the pointwise values (alias-free degree n-1 in φ̄)
    for j in 1..=5 {
        let grid = sd.a_hat(j).to_grid();
        let exact: Vec<f64> = pb.iter().map(|&u| shifted_coefficients(&coeffs, u, star)[j - 1]).collect();
        let proj = from_grid(&exact, n, m);
        assert!(sd.a_hat(j).sub(&proj).l2_norm() < 1e-10 * (1.0 + proj.l2_norm()));
        assert_eq!(grid.len(), m * m);
    }
}

struct Setup {
    model: OuModel,
    prop: Propagator,
    stepper: Phi1Stepper,
    track: TrackResult,
    branch: EquilibriumBranch,
}

fn setup(n: usize, m: usize, eps: f64, sigma: f64, t_end: f64, steps: usize) -> Setup {
    let f = DriftPolynomial::cubic_fixture();
    let times = uniform(t_end, steps);
    let branch = find_equilibrium_branch(&f, &times, 1.0).unwrap();
    let init = FourierField::constant(branch.roots[0], n, m).unwrap();
    let track = deterministic_track(&f, eps, &init, &times, TrackOptions::default()).unwrap();
    let shifted = times[..steps]
        .iter()
        .zip(&track.fields)
        .map(|(&t, phibar)| shifted_drift(&f, &branch, t, phibar).unwrap())
        .collect();
    let model = OuModel::new(n, m, eps, sigma, branch.linearisation_path(), InitialLaw::Zero).unwrap();
    let prop = Propagator::new(&model, &times).unwrap();
    let stepper = Phi1Stepper::new(&model, &prop, shifted, DEFAULT_DIVERGENCE_GUARD).unwrap();
    Setup { model, prop, stepper, track, branch }
}

fn psi_path(s: &Setup, seed: u64) -> (Vec<FourierField>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = s.model.initial_state(&mut rng).unwrap();
    let mut fields = vec![st.psi.clone()];
    let mut vars = vec![s.model.total_variance(&st)];
    for tr in &s.prop.steps {
        s.model.advance(&mut st, tr, &mut rng);
        fields.push(st.psi.clone());
        vars.push(s.model.total_variance(&st));
    }
    (fields, vars)
}

const NORMS: NormSpec = NormSpec { gamma: 0.5, holder_grid: 32, keep_fields: true };

#[test]
fn zero_noise_keeps_phi1_at_zero() {
    let s = setup(4, 32, 0.05, 0.0, 0.5, 100);
    let (psi, vars) = psi_path(&s, 3);
    assert!(psi.iter().all(|p| p.l2_norm() == 0.0));
    let zero = FourierField::zeros(4, 32).unwrap();
    let path = evolve_phi1(&s.stepper, &zero, &psi, &vars, NORMS).unwrap();
    assert!(path.fields.iter().all(|f| f.l2_norm() < 1e-14));
    assert!(path.sup_holder() < 1e-14);
}

#[test]
fn wickb_expansion_matches_compact_form() {
    let s = setup(4, 32, 0.05, 0.2, 0.5, 10);
    let phi1 = random_field(4, 32, 0.1, 4);
    let psi = random_field(4, 32, 0.3, 5);
    let c = 0.21;
    let b = s.stepper.nonlinearity(3, &phi1, &psi, c);
    let sd = s.stepper.shifted(3);
    let (u, v) = (phi1.to_grid(), psi.to_grid());
    let coef: Vec<Vec<f64>> = (1..=3).map(|j| sd.a_hat(j).to_grid()).collect();
    let values: Vec<f64> = (0..u.len())
        .map(|x| (1..=3).map(|j| coef[j - 1][x] * hermite(j, u[x] + v[x], c)).sum())
        .collect();
    let oracle = from_grid(&values, 4, 32);
    assert!(b.sub(&oracle).l2_norm() < 1e-12 * (1.0 + oracle.l2_norm()));
}

#[test]
fn phi1_scheme_is_first_order() {
    // step sizes resolve the fastest mode, ε/μ_max ≈ 3e-3
    let (n, m, eps, sigma, t_end) = (2, 16, 0.5, 0.5, 0.2);
    let base = 200;
    let fine = setup(n, m, eps, sigma, t_end, base * 4);
    let (psi, vars) = psi_path(&fine, 11);
    let zero = FourierField::zeros(n, m).unwrap();
    let mut finals = Vec::new();
    for stride in [4usize, 2, 1] {
        let s = setup(n, m, eps, sigma, t_end, base * 4 / stride);
        let sub: Vec<FourierField> = psi.iter().step_by(stride).cloned().collect();
        let subv: Vec<f64> = vars.iter().step_by(stride).copied().collect();
        let path = evolve_phi1(&s.stepper, &zero, &sub, &subv, NORMS).unwrap();
        finals.push(path.fields.last().unwrap().clone());
    }
    let d1 = finals[0].sub(&finals[1]).l2_norm();
    let d2 = finals[1].sub(&finals[2]).l2_norm();
    assert!(finals[2].l2_norm() > 10.0 * d1, "signal {} vs {d1:e} {d2:e}", finals[2].l2_norm());
    let ratio = d1 / d2;
    assert!((1.5..=2.8).contains(&ratio), "halving ratio {ratio} ({d1:e}, {d2:e})");
}

/// Integrates `ε dφ = (Δφ + :F(t, φ):) dt + σ√ε dW` with Wick variance equal to
/// that of `ψ`, reusing the ψ noise draws, and compares with `φ̄ + ψ + φ₁`.
fn reconstruction_gap(steps: usize) -> f64 {
    let (n, m, eps, sigma, t_end) = (4, 32, 0.1, 0.2, 0.4);
    let s = setup(n, m, eps, sigma, t_end, steps);
    let f = DriftPolynomial::cubic_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut psi = s.model.initial_state(&mut rng).unwrap();
    let mut rem = FourierField::zeros(n, m).unwrap();
    let mut direct = ConvolutionState { t: 0.0, psi: s.track.fields[0].clone(), variances: psi.variances.clone() };
    for (i, tr) in s.prop.steps.iter().enumerate() {
        let t = tr.t;
        let c = s.model.total_variance(&psi);
        let a = s.branch.slopes[i];
        let coeffs = f.coefficients_at(t);
        let values: Vec<f64> = direct
            .psi
            .to_grid()
            .iter()
            .map(|&x| (0..=3).map(|j| coeffs[j] * hermite(j, x, c)).sum::<f64>() - a * x)
            .collect();
        let g = from_grid(&values, n, m);
        let drift = s.model.path.alpha(t + tr.h, t);
        s.stepper.step(i, &mut rem, &psi.psi, c).unwrap();
        let mut noise_rng = rng.clone();
        s.model.advance(&mut psi, tr, &mut rng);
        s.model.advance(&mut direct, tr, &mut noise_rng);
        let modes: Vec<ModeIndex> = g.modes().collect();
        for k in modes.into_iter().filter(|k| k.is_half_plane() || *k == ModeIndex::ZERO) {
            let z = (-k.eigenvalue() * tr.h + drift) / eps;
            let w = tr.h / eps * phi1(z);
            let value: Complex64 = direct.psi.coeff(k) + g.coeff(k) * w;
            direct.psi.set(k, value);
        }
    }
    let split = SplitSolution {
        phibar: s.track.fields.last().unwrap().clone(),
        psi,
        phi1: rem,
        shifted: s.stepper.shifted(steps - 1).clone(),
    };
    assert!((split.t() - t_end).abs() < 1e-12);
    split.reconstruct().unwrap().sub(&direct.psi).l2_norm()
}

#[test]
fn split_reconstructs_direct_wick_solution() {
    let coarse = reconstruction_gap(80);
    let fine = reconstruction_gap(160);
    assert!(coarse < 5e-3, "gap {coarse}");
    let ratio = coarse / fine;
    assert!((1.4..=3.0).contains(&ratio), "gap ratio {ratio} ({coarse:e}, {fine:e})");
}

#[test]
fn tracker_distance_scales_with_eps_and_a1_is_order_eps() {
    let f = DriftPolynomial::cubic_fixture();
    let times = uniform(1.0, 50);
    let branch = find_equilibrium_branch(&f, &times, 1.0).unwrap();
    let init = FourierField::constant(branch.roots[0], 4, 32).unwrap();
    let mut dist = Vec::new();
    let mut a1 = Vec::new();
    for eps in [0.02, 0.01, 0.005] {
        let track = deterministic_track(&f, eps, &init, &times, TrackOptions::default()).unwrap();
        dist.push(track.sup_h1_distance(&branch));
        let worst = times
            .iter()
            .zip(&track.fields)
            .map(|(&t, fl)| h1_norm(shifted_drift(&f, &branch, t, fl).unwrap().a_hat(1)))
            .fold(0.0, f64::max);
        a1.push(worst / eps);
    }
    for w in dist.windows(2) {
        let r = w[0] / w[1];
        assert!((1.7..=2.3).contains(&r), "ratio {r} from {dist:?}");
    }
    let spread = a1.iter().copied().fold(0.0, f64::max) / a1.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.5, "Â₁/ε = {a1:?}");
}

#[test]
fn pitchfork_zero_noise_stays_at_rest() {
    let model = PitchforkModel::new(4, 32, 0.05, 0.0, LinearisationPath::crossing(0.5)).unwrap();
    let sched = model.schedule(&uniform(1.0, 100)).unwrap();
    let mut st = model.initial_state(0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..100 {
        pitchfork_step(&model, &sched, i, &mut st, &mut rng).unwrap();
    }
    assert_eq!(st.phi10, 0.0);
    assert_eq!(st.perp.l2_norm(), 0.0);
    assert_eq!(st.psi.psi.l2_norm(), 0.0);
}

#[test]
fn pitchfork_transverse_fields_have_zero_mean() {
    let model = PitchforkModel::new(4, 32, 0.05, 0.2, LinearisationPath::crossing(0.5)).unwrap();
    let sched = model.schedule(&uniform(0.5, 50)).unwrap();
    let mut st = model.initial_state(0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..50 {
        pitchfork_step(&model, &sched, i, &mut st, &mut rng).unwrap();
        assert_eq!(st.psi.psi.coeff(ModeIndex::ZERO), Complex64::new(0.0, 0.0));
        assert_eq!(st.perp.coeff(ModeIndex::ZERO), Complex64::new(0.0, 0.0));
    }
    assert!(st.perp.l2_norm() > 0.0);
}

#[test]
fn linearised_zero_mode_variance_matches_profile() {
    let (eps, sigma, t_end, steps) = (0.05, 0.1, 0.8, 80);
    let path = LinearisationPath::crossing(0.5);
    let model = PitchforkModel::new(1, 3, eps, sigma, path.clone()).unwrap().linearised();
    let times = uniform(t_end, steps);
    let sched = model.schedule(&times).unwrap();
    let finals = Ensemble::new(17, 0)
        .map(100_000, |_, rng| {
            let mut st = model.initial_state(0.0).unwrap();
            for i in 0..steps {
                model.step(&sched, i, &mut st, rng).unwrap();
            }
            st.phi10
        })
        .unwrap();
    let target = *linear_variance_profile(&path, eps, sigma, 0.0, &times).unwrap().last().unwrap();
    let est = variance_about_zero(&finals);
    assert!(est.agrees_with(target, 3.0, 0.0), "variance {est:?} vs {target}");
}

#[test]
fn pitchfork_zero_mode_mean_vanishes() {
    let (eps, sigma) = (0.05, 0.05);
    let model = PitchforkModel::new(4, 32, eps, sigma, LinearisationPath::crossing(0.5)).unwrap();
    let times = uniform(1.0, 400);
    let sched = model.schedule(&times).unwrap();
    let finals = Ensemble::new(23, 0)
        .map(800, |_, rng| {
            let mut st = model.initial_state(0.0).unwrap();
            for i in 0..400 {
                model.step(&sched, i, &mut st, rng).unwrap();
            }
            st.phi10
        })
        .unwrap();
    let est = finals.iter().copied().collect::<Moments>().estimate();
    assert!(est.agrees_with(0.0, 4.0, 0.0), "mean {est:?}");
    assert!(finals.iter().any(|x| x.abs() > 0.1), "no path left the origin");
}

#[test]
fn schauder_examples() {
    let g = random_field(16, 64, 1.0, 31);
    let t_grid = |n: usize| -> Vec<f64> { (0..n).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / (n - 1) as f64)).collect() };
    let same = schauder_check(&g, 0.3, 0.3, &t_grid(100)).unwrap();
    assert!(same <= 1.0 + 1e-10);
    let coarse = schauder_check(&g, -0.5, 1.0, &t_grid(200)).unwrap();
    let fine = schauder_check(&g, -0.5, 1.0, &t_grid(400)).unwrap();
    assert!(coarse.is_finite() && (coarse / fine - 1.0).abs() < 0.05, "{coarse} vs {fine}");
    assert!(matches!(schauder_check(&g, 0.0, 2.5, &t_grid(10)), Err(SpdeError::Precondition(_))));

    let k = ModeIndex::new(5, 2);
    assert_eq!(k.annulus(), 3);
    let single = FourierField::from_modes(8, 17, &[(k, Complex64::new(0.3, -0.2))]).unwrap();
    let (alpha, beta) = (-0.7f64, 0.9f64);
    let grid = t_grid(50);
    let closed = grid
        .iter()
        .map(|&t| (3.0 * (beta - alpha)).exp2() * (-k.eigenvalue() * t).exp() * t.powf(0.5 * (beta - alpha)))
        .fold(0.0, f64::max);
    let got = schauder_check(&single, alpha, beta, &grid).unwrap();
    assert!((got - closed).abs() < 1e-8 * closed);
}
