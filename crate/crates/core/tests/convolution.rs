use proptest::prelude::*;
use spde_core::convolution::*;
use spde_core::field::{annulus_of, modes_in_ball};
use spde_core::parallel::{path_rng, Ensemble};
use spde_core::stats::Moments;
use spde_core::wick::stationary_variance;
use spde_core::ModeIndex;

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn affine_transition_matches_direct_integration() {
    let (eps, sigma) = (0.2, 0.3);
    let path = LinearisationPath::Affine { offset: -2.0, slope: 1.5 };
    let model = OuModel::new(2, 8, eps, sigma, path, InitialLaw::Zero).unwrap();
    let (t, h) = (0.3, 0.05);
    let tr = model.transition(t, h);
    for c in 0..model.class_count() {
        let mu = model.class_eigenvalue(c);
        let alpha_k = |hi: f64, lo: f64| -mu * (hi - lo) + (-2.0 * (hi - lo) + 0.75 * (hi * hi - lo * lo));
        let decay = (alpha_k(t + h, t) / eps).exp();
        let innov = sigma * sigma / eps * simpson(|s| (2.0 * alpha_k(t + h, s) / eps).exp(), t, t + h, 40_000);
        assert!((tr.decay[c] - decay).abs() < 1e-13 * decay, "class {c}");
        assert!((tr.innovation[c] - innov).abs() < 1e-9 * innov, "class {c}: {} vs {innov}", tr.innovation[c]);
    }
}

#[test]
fn tabulated_path_reproduces_affine_transitions() {
    let times: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
    let affine = LinearisationPath::Affine { offset: -1.0, slope: 0.8 };
    let table = LinearisationPath::tabulated(times.clone(), times.iter().map(|&t| affine.value(t)).collect()).unwrap();
    for &(t, s) in &[(1.0, 0.0), (0.7, 0.2), (0.123, 0.456), (1.3, -0.2)] {
        let (a, b) = (affine.alpha(t, s), table.alpha(t, s));
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
            assert!((a - b).abs() < 1e-13, "{t} {s}");
        }
    }
    let m1 = OuModel::new(2, 8, 0.1, 0.5, affine, InitialLaw::Zero).unwrap();
    let m2 = OuModel::new(2, 8, 0.1, 0.5, table, InitialLaw::Zero).unwrap();
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
    let (p1, p2) = (Propagator::new(&m1, &grid).unwrap(), Propagator::new(&m2, &grid).unwrap());
    for (a, b) in p1.steps.iter().zip(&p2.steps) {
        for c in 0..a.decay.len() {
            assert!((a.decay[c] - b.decay[c]).abs() < 1e-12);
            assert!((a.innovation[c] - b.innovation[c]).abs() < 1e-10 * a.innovation[c].max(1e-300));
        }
    }
}

#[test]
fn tabulated_path_is_held_constant_outside_the_table() {
    let p = LinearisationPath::tabulated(vec![0.0, 1.0], vec![-1.0, -3.0]).unwrap();
    assert_eq!(p.value(-1.0), -1.0);
    assert_eq!(p.value(2.0), -3.0);
    assert!((p.alpha(2.0, 1.0) + 3.0).abs() < 1e-15);
    assert!((p.alpha(0.0, -1.0) + 1.0).abs() < 1e-15);
    assert_eq!(p.max_on(0.2, 0.8), p.value(0.2));
    assert!(LinearisationPath::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(LinearisationPath::tabulated(vec![0.0], vec![]).is_err());
}

#[test]
fn stationary_law_is_preserved_by_the_moment_recursion() {
    let model = OuModel::new(4, 16, 0.1, 0.4, LinearisationPath::Constant(-1.0), InitialLaw::Stationary).unwrap();
    let mut rng = path_rng(1, 0);
    let mut st = model.initial_state(&mut rng).unwrap();
    let v0 = st.variances.clone();
    for _ in 0..20 {
        model.step_exact(&mut st, 0.013, &mut rng).unwrap();
    }
    for (a, b) in st.variances.iter().zip(&v0) {
        assert!((a - b).abs() < 1e-14 * b);
    }
    for k in modes_in_ball(4) {
        let v = stationary_variance(0.4, k);
        assert!((model.mode_variance(&st, k) - v).abs() < 1e-14 * v);
    }
    let total: f64 = modes_in_ball(4).map(|k| stationary_variance(0.4, k)).sum();
    assert!((model.total_variance(&st) - total).abs() < 1e-13 * total);
}

#[test]
fn variance_recursion_matches_closed_form_from_rest() {
    let model = OuModel::new(3, 8, 0.05, 1.0, LinearisationPath::Constant(-0.5), InitialLaw::Zero).unwrap();
    let mut rng = path_rng(2, 0);
    let mut st = model.initial_state(&mut rng).unwrap();
    for _ in 0..7 {
        model.step_exact(&mut st, 0.01, &mut rng).unwrap();
    }
    for k in [ModeIndex::ZERO, ModeIndex::new(1, 0), ModeIndex::new(2, 1)] {
        let lambda = k.eigenvalue() + 0.5;
        let want = (1.0 - (-2.0 * lambda * st.t / 0.05).exp()) / (2.0 * lambda);
        assert!((model.mode_variance(&st, k) - want).abs() < 1e-13 * want);
        assert!((model.constant_path_variance(k, 0.0, st.t).unwrap() - want).abs() < 1e-13 * want);
    }
}

#[test]
fn sampled_mode_variances_match_the_law() {
    let (eps, sigma) = (0.1, 1.0);
    let model = OuModel::new(2, 8, eps, sigma, LinearisationPath::Constant(-1.0), InitialLaw::Zero).unwrap();
    let times: Vec<f64> = (0..=5).map(|i| i as f64 * 0.004).collect();
    let prop = Propagator::new(&model, &times).unwrap();
    let modes = [ModeIndex::ZERO, ModeIndex::new(1, 0), ModeIndex::new(1, 1)];
    let runs = Ensemble::new(3, 0)
        .map(20_000, |_, rng| {
            let mut st = model.initial_state(rng).unwrap();
            for tr in &prop.steps {
                model.advance(&mut st, tr, rng);
            }
            modes.map(|k| st.psi.coeff(k).norm_sqr())
        })
        .unwrap();
    for (i, &k) in modes.iter().enumerate() {
        let m: Moments = runs.iter().map(|r| r[i]).collect();
        let lambda = k.eigenvalue() + 1.0;
        let want = sigma * sigma * (1.0 - (-2.0 * lambda * 0.02 / eps).exp()) / (2.0 * lambda);
        let e = m.estimate();
        assert!(e.agrees_with(want, 4.0, 0.0), "{k:?}: {e:?} vs {want}");
    }
}

#[test]
fn zero_mode_can_be_switched_off() {
    let model = OuModel::new(2, 8, 0.1, 1.0, LinearisationPath::Constant(-1.0), InitialLaw::Stationary)
        .unwrap()
        .without_zero_mode();
    let mut rng = path_rng(4, 0);
    let mut st = model.initial_state(&mut rng).unwrap();
    model.step_exact(&mut st, 0.05, &mut rng).unwrap();
    assert_eq!(st.psi.mean(), 0.0);
    assert_eq!(model.mode_variance(&st, ModeIndex::ZERO), 0.0);
}

#[test]
fn stationary_start_needs_a_stable_zero_mode() {
    let model = OuModel::new(1, 4, 0.1, 1.0, LinearisationPath::Constant(0.5), InitialLaw::Stationary).unwrap();
    assert!(model.initial_variances().is_err());
    assert!(OuModel::new(1, 4, 0.0, 1.0, LinearisationPath::Constant(-1.0), InitialLaw::Zero).is_err());
}

#[test]
fn martingale_transform_is_identity_at_the_right_endpoint() {
    let model = OuModel::new(2, 8, 0.1, 0.3, LinearisationPath::Constant(-1.0), InitialLaw::Stationary).unwrap();
    let part = build_partition(0.2, 0.1, 1.0, 1).unwrap();
    let mut rng = path_rng(5, 0);
    let mut st = model.initial_state(&mut rng).unwrap();
    let target = part.breakpoints[1];
    model.step_exact(&mut st, target, &mut rng).unwrap();
    let snap = model.martingale_transform(&st, &part, 0).unwrap();
    assert!(snap.psi.sub(&st.psi).l2_norm() < 1e-14);
    assert!(snap.factors.iter().all(|f| (f - 1.0).abs() < 1e-12));
    assert!(model.martingale_transform(&st, &part, part.intervals()).is_err());
    // at the left end of the next interval the reference mode is damped by e^{-γ₀}
    let next = model.martingale_transform(&st, &part, 1).unwrap();
    let c = model.class_of(part.reference).unwrap();
    assert!((next.factors[c] - (-part.gamma0).exp()).abs() < 1e-12);
    assert!((next.variances[c] - st.variances[c] * next.factors[c].powi(2)).abs() < 1e-15);
}

#[test]
fn partition_for_constant_path_matches_closed_form() {
    let (t_end, eps, gamma0, q_bar) = (1.0, 0.05, 0.5, 2);
    let closed = build_partition(t_end, eps, gamma0, q_bar).unwrap();
    let general = build_partition_for_path(&LinearisationPath::Constant(-1.0), t_end, eps, gamma0, q_bar).unwrap();
    let mu = ModeIndex::new(4, 0).eigenvalue();
    let l = ((mu + 1.0) * t_end / (gamma0 * eps)).floor() as usize;
    assert_eq!(closed.intervals(), l);
    assert_eq!(general.intervals(), closed.intervals());
    for (a, b) in closed.breakpoints.iter().zip(&general.breakpoints) {
        assert!((a - b).abs() < 1e-9);
    }
    let w = gamma0 * eps / (mu + 1.0);
    for pair in closed.breakpoints.windows(2).skip(1) {
        assert!((pair[1] - pair[0] - w).abs() < 1e-12);
    }
    assert_eq!(closed.interval_of(0.0), Some(0));
    assert_eq!(closed.interval_of(1.0), Some(l - 1));
    assert_eq!(closed.interval_of(1.5), None);
}

#[test]
fn oracle_single_factor_is_the_annulus_variance() {
    let sigma = 0.8;
    let v = |k: ModeIndex| stationary_variance(sigma, k);
    // one factor from annulus 1 lands in annulus 1
    let e = chaos_expectation_oracle(&[0, 1], 1, 1, &v).unwrap();
    let want: f64 = modes_in_ball(1).filter(|k| k.annulus() == 1).map(v).sum();
    assert!((e - want).abs() < 1e-15 * want);
    assert_eq!(chaos_expectation_oracle(&[0, 1], 0, 1, &v).unwrap(), 0.0);
    // :ψ_0²: has second moment 2 v_0²
    let e0 = chaos_expectation_oracle(&[2], 0, 0, &v).unwrap();
    assert!((e0 - 2.0 * v(ModeIndex::ZERO).powi(2)).abs() < 1e-15);
}

#[test]
fn oracle_pair_sum_by_enumeration() {
    let sigma = 1.0;
    let v = |k: ModeIndex| stationary_variance(sigma, k);
    let n = 2;
    let table = chaos_expectation_table(&[0, 1, 1], n, &v).unwrap();
    let a1: Vec<ModeIndex> = modes_in_ball(n).filter(|k| k.annulus() == 1).collect();
    let a2: Vec<ModeIndex> = modes_in_ball(n).filter(|k| k.annulus() == 2).collect();
    let mut want = vec![0.0; table.len()];
    for &k in &a1 {
        for &l in &a2 {
            let s = ModeIndex::new(k.k1 + l.k1, k.k2 + l.k2);
            want[annulus_of(s.l1()) as usize] += v(k) * v(l);
        }
    }
    for (a, b) in table.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15 * b.max(1e-300));
    }
    assert!(chaos_expectation_table(&[0, 0, 0, 4], 8, &v).is_err());
    assert!(chaos_expectation_table(&[0, 1], 9, &v).is_err());
}

#[test]
fn oracle_agrees_with_monte_carlo_for_a_small_case() {
    let sigma = 1.0;
    let v = |k: ModeIndex| stationary_variance(sigma, k);
    let hbn = vec![vec![1, 1], vec![0, 2]];
    let mc = chaos_expectation_mc(&hbn, 1, sigma, 20_000, &Ensemble::new(6, 0)).unwrap();
    for (i, h) in hbn.iter().enumerate() {
        let exact = chaos_expectation_table(h, 1, &v).unwrap();
        for (q0, est) in mc.estimates[i].iter().enumerate() {
            let want = exact.get(q0).copied().unwrap_or(0.0);
            assert!(est.agrees_with(want, 4.0, 1e-12), "{h:?} q0={q0}: {est:?} vs {want}");
        }
    }
}

#[test]
fn ensemble_results_do_not_depend_on_threads() {
    let model = OuModel::new(3, 8, 0.1, 0.5, LinearisationPath::Constant(-1.0), InitialLaw::Stationary).unwrap();
    let run = |threads| {
        Ensemble::new(9, threads)
            .map(16, |_, rng| {
                let mut st = model.initial_state(rng).unwrap();
                model.step_exact(&mut st, 0.01, rng).unwrap();
                st.psi.raw().to_vec()
            })
            .unwrap()
    };
    assert_eq!(run(1), run(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_is_additive(t0 in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let paths = [
            LinearisationPath::Affine { offset: -1.0, slope: 0.3 },
            LinearisationPath::Polynomial(vec![-1.0, 0.2, -0.4]),
            LinearisationPath::tabulated(vec![0.0, 0.25, 0.6, 1.0], vec![-1.0, -2.0, -0.5, -1.2]).unwrap(),
        ];
        for p in &paths {
            let lhs = p.alpha(t2, t0);
            let rhs = p.alpha(t2, t1) + p.alpha(t1, t0);
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn transitions_contract(h in 1e-4f64..0.5, t in 0.0f64..1.0) {
        let model = OuModel::new(3, 8, 0.1, 1.0, LinearisationPath::Constant(-1.0), InitialLaw::Zero).unwrap();
        let tr = model.transition(t, h);
        for c in 0..tr.decay.len() {
            prop_assert!(tr.decay[c] >= 0.0 && tr.decay[c] < 1.0);
            // v_{t+h} = d² v_t + q keeps the stationary variance fixed
            let lambda = model.class_eigenvalue(c) + 1.0;
            let vs = 1.0 / (2.0 * lambda);
            prop_assert!((tr.decay[c].powi(2) * vs + tr.innovation[c] - vs).abs() < 1e-12 * vs);
        }
    }
}
