use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::common::Gate;
use crate::convolution::{chaos_expectation_mc, chaos_expectation_table, InitialLaw, LinearisationPath, OuModel};
use crate::error::Result;
use crate::field::{read_container, write_container, FourierField, ModeIndex};
use crate::parallel::Ensemble;
use crate::solver::schauder_check;
use crate::stats::variance_about_zero;
use crate::wick::{
    hermite, hermite_coeffs, stationary_variance, wick_binomial, wick_multinomial_blocks, wick_power_field,
    RenormConstant,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub seed: u64,
    pub gates: Vec<Gate>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

fn hermite_gate(rng: &mut ChaCha8Rng) -> Result<Gate> {
    let mut worst = 0.0f64;
    for m in 0..=10 {
        let coeffs = hermite_coeffs(m)?;
        for _ in 0..100 {
            let (x, c) = (rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0));
            let (value, scale) = coeffs.eval(x, c);
            worst = worst.max((value - hermite(m, x, c)).abs() / scale.max(1e-300));
        }
    }
    Ok(Gate::new("hermite recursion vs expanded coefficients", worst <= 1e-10, worst, "relative to the absolute-term scale, m <= 10"))
}

fn binomial_gate(rng: &mut ChaCha8Rng) -> Gate {
    let mut worst = 0.0f64;
    for n in 0..=8 {
        for _ in 0..100 {
            let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let (c1, c2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let exact = hermite(n, x + y, c1 + c2);
            worst = worst.max((wick_binomial(n, x, y, c1, c2) - exact).abs() / (1.0 + exact.abs()));
        }
    }
    Gate::new("wick binomial identity", worst <= 1e-8, worst, "n <= 8")
}

fn multinomial_gate(rng: &mut ChaCha8Rng) -> Result<Gate> {
    let (n, sigma) = (8, 1.0);
    let renorm = RenormConstant::new(n, sigma);
    let mut worst = 0.0f64;
    for m in 1..=3 {
        let grid = crate::field::dealiased_grid_size(n, m, n);
        let field = FourierField::random(n, grid, rng, |k| stationary_variance(sigma, k))?;
        let blocks = wick_multinomial_blocks(&field, m, &renorm.annulus, renorm.value)?;
        let direct = wick_power_field(&field, m, renorm.value)?;
        worst = worst.max(blocks.sub(&direct).l2_norm() / (1.0 + direct.l2_norm()));
    }
    Ok(Gate::new("wick multinomial identity over annuli", worst <= 1e-8, worst, "N = 8, m <= 3, relative L2"))
}

fn parseval_gate(rng: &mut ChaCha8Rng) -> Result<Gate> {
    let field = FourierField::random(8, 32, rng, |k| 1.0 / (1.0 + k.norm_sq() as f64))?;
    let grid = field.to_grid();
    let physical = grid.iter().map(|x| x * x).sum::<f64>() / grid.len() as f64;
    let spectral = field.l2_norm_sq();
    let err = (physical - spectral).abs() / spectral;
    Ok(Gate::new("parseval", err <= 1e-12, err, "grid mean of phi^2 vs sum of |phi_k|^2"))
}

fn container_gate(rng: &mut ChaCha8Rng) -> Result<Gate> {
    let field = FourierField::random(6, 16, rng, |_| 1.0)?;
    let mut bytes = Vec::new();
    write_container(&field, &mut bytes)?;
    let back = read_container(bytes.as_slice())?;
    let same = back == field;
    Ok(Gate::new("binary container round trip", same, if same { 0.0 } else { 1.0 }, format!("{} bytes", bytes.len())))
}

fn ou_gate(samples: usize, seed: u64, threads: usize) -> Result<Gate> {
    let (n, sigma) = (4, 1.0);
    let model = OuModel::new(n, 2 * n + 1, 0.1, sigma, LinearisationPath::Constant(-1.0), InitialLaw::Stationary)?;
    let modes = [ModeIndex::ZERO, ModeIndex::new(1, 0), ModeIndex::new(2, 1), ModeIndex::new(0, 4)];
    let draws = Ensemble::new(seed, threads).map(samples, |_, rng| -> Result<Vec<f64>> {
        let mut st = model.initial_state(rng)?;
        model.step_exact(&mut st, 0.05, rng)?;
        Ok(modes.iter().map(|&k| st.psi.coeff(k).re).collect())
    })?;
    let draws: Vec<Vec<f64>> = draws.into_iter().collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (i, &k) in modes.iter().enumerate() {
        let target = if k == ModeIndex::ZERO { 1.0 } else { 0.5 } * stationary_variance(sigma, k);
        let column: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        worst = worst.max(variance_about_zero(&column).z_score(target).abs());
    }
    Ok(Gate::new("OU stationary variance", worst <= 3.5, worst, format!("max |z| over 4 modes, {samples} samples")))
}

fn chaos_gate(samples: usize, seed: u64, threads: usize) -> Result<Gate> {
    let (n, sigma) = (4, 1.0);
    let indices = vec![vec![1], vec![0, 1], vec![0, 2], vec![1, 1], vec![0, 0, 1], vec![2, 1], vec![0, 1, 1]];
    let table = chaos_expectation_mc(&indices, n, sigma, samples, &Ensemble::new(seed, threads))?;
    let mut worst = 0.0f64;
    for (hbn, est) in indices.iter().zip(&table.estimates) {
        let exact = chaos_expectation_table(hbn, n, &|k| stationary_variance(sigma, k))?;
        let floor = 1e-12 * exact.iter().copied().fold(0.0, f64::max);
        for (q0, e) in est.iter().enumerate() {
            let x = exact.get(q0).copied().unwrap_or(0.0);
            if (e.mean - x).abs() <= floor {
                continue;
            }
            worst = worst.max(if e.stderr > 0.0 { e.z_score(x).abs() } else { f64::INFINITY });
        }
    }
    Ok(Gate::new("chaos expectation oracle vs Monte Carlo", worst <= 4.0, worst, format!("max |z|, N = {n}, {samples} samples")))
}

/// Oracle checks for the numerical building blocks. `quick` shrinks the
/// Monte Carlo sample sizes.
pub fn run_selftest(quick: bool, seed: u64, threads: usize) -> Result<SelftestReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = if quick { 4_000 } else { 40_000 };
    let mut gates = vec![
        hermite_gate(&mut rng)?,
        binomial_gate(&mut rng),
        multinomial_gate(&mut rng)?,
        parseval_gate(&mut rng)?,
        container_gate(&mut rng)?,
        ou_gate(samples, seed, threads)?,
        chaos_gate(samples / 4, seed.wrapping_add(1), threads)?,
    ];
    let g = FourierField::random(8, 17, &mut rng, |k| 1.0 / (1.0 + k.norm_sq() as f64))?;
    let times: Vec<f64> = (0..60).map(|i| 10f64.powf(-5.0 + 5.0 * i as f64 / 59.0)).collect();
    let contraction = schauder_check(&g, 0.2, 0.2, &times)?;
    gates.push(Gate::new("heat semigroup contraction", contraction <= 1.0 + 1e-10, contraction, "beta = alpha"));
    Ok(SelftestReport { quick, seed, gates })
}
