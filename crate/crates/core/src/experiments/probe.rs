use std::io::Write;

use serde::{Deserialize, Serialize};

use super::common::{auto_thresholds, exceedance_curve, fit_rate, fmt, uniform_times, ExceedancePoint, Gate, RateFit};
use crate::convolution::{InitialLaw, LinearisationPath, OuModel, Propagator};
use crate::error::{Result, SpdeError};
use crate::field::{besov_norm_l2, bump, ScaledTest};
use crate::parallel::Ensemble;
use crate::wick::wick_power_field;

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub eps: f64,
    pub sigma: f64,
    pub t_end: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub path: LinearisationPath,
    pub init: InitialLaw,
    pub m: usize,
    pub alpha: f64,
    pub q0s: Vec<u32>,
    /// Scaling `η_ρ = ρ^{2/p - 2} η(·/ρ)`; `p = 2` keeps `‖η_ρ‖_{L²}` fixed.
    pub p: f64,
    pub thresholds: usize,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCurve {
    pub q0: u32,
    pub rho: f64,
    pub points: Vec<ExceedancePoint>,
    pub fit: RateFit,
    /// `max |⟨:ψ^m:, η_ρ⟩| / (2^{|α| q0} ‖:ψ^m:‖_{B^α_{2,∞}})` over paths and times.
    pub besov_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub eps: f64,
    pub sigma: f64,
    pub m: usize,
    pub alpha: f64,
    pub p: f64,
    pub paths: usize,
    pub seed: u64,
    pub curves: Vec<ProbeCurve>,
    /// `+1` if fitted rates increase with `q0`, `-1` if they decrease, `0` otherwise.
    pub rate_direction: i32,
    /// `κ̂(q0) / (κ̂(0) 2^{-2|α| q0 / m})` per curve; values `≥ 1` are within the bound.
    pub deflation_ratio: Vec<f64>,
    pub gates: Vec<Gate>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// Columns `q0, h, x, exceedances, paths, p_hat, lo, hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q0,h,x,exceedances,paths,p_hat,lo,hi")?;
        for c in &self.curves {
            for p in &c.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    c.q0,
                    fmt(p.h),
                    fmt(p.x),
                    p.exceedances,
                    p.paths,
                    fmt(p.p_hat),
                    fmt(p.lo),
                    fmt(p.hi)
                )?;
            }
        }
        Ok(())
    }
}

/// Tails of `sup_t |⟨:ψ(t)^m:, η_{2^{-q0}}⟩|` for a fixed bump `η`.
pub fn pairing_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    if cfg.q0s.is_empty() || cfg.paths == 0 || cfg.m == 0 || !(cfg.alpha < 0.0) {
        return Err(SpdeError::Config("need q0 values, paths > 0, m >= 1 and alpha < 0".into()));
    }
    let tests = cfg
        .q0s
        .iter()
        .map(|&q| ScaledTest::new(bump, (-(q as f64)).exp2(), cfg.p, cfg.cutoff))
        .collect::<Result<Vec<_>>>()?;
    let model = OuModel::new(cfg.cutoff, cfg.grid, cfg.eps, cfg.sigma, cfg.path.clone(), cfg.init)?;
    let times = uniform_times(cfg.t_end, cfg.dt)?;
    let prop = Propagator::new(&model, &times)?;
    let nq = tests.len();
    let runs = Ensemble::new(cfg.seed, cfg.threads).map(cfg.paths, |_, rng| -> Result<Vec<f64>> {
        // [sup |pairing| per q0, then max besov ratio per q0]
        let mut out = vec![0.0f64; 2 * nq];
        let mut st = model.initial_state(rng)?;
        let mut observe = |st: &crate::convolution::ConvolutionState| -> Result<()> {
            let w = wick_power_field(&st.psi, cfg.m, model.total_variance(st))?;
            let norm = besov_norm_l2(&w, cfg.alpha, f64::INFINITY)?;
            for (i, (test, &q)) in tests.iter().zip(&cfg.q0s).enumerate() {
                let pair = test.pair(&w).abs();
                out[i] = out[i].max(pair);
                if norm > 0.0 {
                    out[nq + i] = out[nq + i].max(pair / ((cfg.alpha.abs() * q as f64).exp2() * norm));
                }
            }
            Ok(())
        };
        observe(&st)?;
        for tr in &prop.steps {
            model.advance(&mut st, tr, rng);
            observe(&st)?;
        }
        Ok(out)
    })?;
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let mut curves = Vec::new();
    for (i, &q0) in cfg.q0s.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r[i].powf(1.0 / cfg.m as f64)).collect();
        let points = exceedance_curve(&values, &auto_thresholds(&values, 0.3, cfg.thresholds), cfg.sigma);
        curves.push(ProbeCurve {
            q0,
            rho: (-(q0 as f64)).exp2(),
            fit: fit_rate(&points),
            points,
            besov_constant: runs.iter().map(|r| r[nq + i]).fold(0.0, f64::max),
        });
    }
    let kappas: Vec<f64> = curves.iter().map(|c| c.fit.kappa).collect();
    let rate_direction = if kappas.iter().any(|k| !k.is_finite()) {
        0
    } else if kappas.windows(2).all(|w| w[1] > w[0]) {
        1
    } else if kappas.windows(2).all(|w| w[1] < w[0]) {
        -1
    } else {
        0
    };
    let k0 = kappas.first().copied().unwrap_or(f64::NAN);
    let q_first = cfg.q0s[0] as f64;
    let deflation_ratio: Vec<f64> = cfg
        .q0s
        .iter()
        .zip(&kappas)
        .map(|(&q, &k)| k / (k0 * (-2.0 * cfg.alpha.abs() * (q as f64 - q_first) / cfg.m as f64).exp2()))
        .collect();
    let constant = curves.iter().map(|c| c.besov_constant).fold(0.0, f64::max);
    let gates = vec![
        Gate::new("fitted rates ordered in q0", rate_direction != 0, rate_direction as f64, format!("kappa = {kappas:?}")),
        Gate::new(
            "rates consistent with the deflation bound",
            deflation_ratio.iter().all(|&r| r >= 0.8),
            deflation_ratio.iter().copied().fold(f64::INFINITY, f64::min),
            "kappa(q0) / (kappa(q0_first) 2^{-2|alpha|(q0 - q0_first)/m}) >= 0.8",
        ),
        Gate::new(
            "path-wise Besov pairing constant finite",
            constant.is_finite(),
            constant,
            "max |<w, eta_rho>| / (2^{|alpha| q0} ||w||_{B^alpha_2,inf})",
        ),
    ];
    Ok(ProbeReport {
        eps: cfg.eps,
        sigma: cfg.sigma,
        m: cfg.m,
        alpha: cfg.alpha,
        p: cfg.p,
        paths: cfg.paths,
        seed: cfg.seed,
        curves,
        rate_direction,
        deflation_ratio,
        gates,
    })
}
