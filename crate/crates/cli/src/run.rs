//! Executes one configured run and records it in a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use spde_core::convolution::{OuModel, Propagator};
use spde_core::experiments::*;
use spde_core::field::write_container;
use spde_core::parallel::{path_rng, STREAM_PROTOCOL};

use crate::config::{Format, Kind, RunConfig};
use crate::manifest::{now_unix, sha256_hex, Artifacts, Manifest, Status, Versions, SCHEMA};

/// What a finished run produced.
struct Outcome {
    gates: Vec<Gate>,
}

pub fn execute(cfg: &RunConfig) -> Result<Status> {
    let dir = Path::new(&cfg.output.dir);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Manifest {
        schema: SCHEMA.into(),
        kind: cfg.kind.name().into(),
        versions: Versions { cli: env!("CARGO_PKG_VERSION").into(), core: spde_core::VERSION.into() },
        rng_protocol: STREAM_PROTOCOL.into(),
        seed: cfg.rng.seed,
        threads: cfg.threads,
        config_hash: sha256_hex(cfg.canonical().as_bytes()),
        config: cfg.to_toml(),
        started_unix: now_unix(),
        finished_unix: None,
        complete: false,
        status: Status::Running,
        error: None,
        files: Vec::new(),
        gates: Vec::new(),
    };
    manifest.write(dir)?;
    let mut artifacts = Artifacts::new(dir);
    let result = dispatch(cfg, &mut artifacts);
    manifest.files = artifacts.files;
    manifest.finished_unix = Some(now_unix());
    let status = match result {
        Ok(outcome) => {
            let passed = outcome.gates.iter().all(|g| g.passed);
            manifest.gates = outcome.gates;
            manifest.complete = true;
            if passed {
                Status::Passed
            } else {
                Status::GateFailed
            }
        }
        Err(e) => {
            manifest.error = Some(format!("{e:#}"));
            Status::Error
        }
    };
    manifest.status = status;
    manifest.write(dir)?;
    if let Some(e) = &manifest.error {
        anyhow::bail!("{e}");
    }
    Ok(status)
}

fn dispatch(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    match cfg.kind {
        Kind::Tails => run_tails(cfg, out),
        Kind::Stable => run_stable(cfg, out),
        Kind::Pitchfork => run_pitchfork(cfg, out),
        Kind::Selftest => {
            let r = run_selftest(cfg.selftest.as_ref().is_some_and(|s| s.quick), cfg.rng.seed, cfg.threads)?;
            emit(cfg, out, "selftest", &r, || gates_csv(&r.gates))?;
            Ok(Outcome { gates: r.gates })
        }
        Kind::Schauder => {
            let (m, s) = (cfg.model.as_ref().expect("validated"), cfg.schauder.as_ref().expect("validated"));
            let r = schauder_probe(&SchauderConfig {
                alpha: s.alpha,
                beta: s.beta,
                cutoff: m.cutoff(),
                grid: m.grid(),
                times: s.times,
                t_min: s.t_min,
                tolerance: s.tolerance,
                seed: cfg.rng.seed,
            })?;
            emit(cfg, out, "schauder", &r, || gates_csv(&r.gates))?;
            Ok(Outcome { gates: r.gates })
        }
        Kind::Probe => run_probe(cfg, out),
    }
}

/// Writes `<stem>.json` and `<stem>.csv` according to the configured formats.
fn emit<T: Serialize>(
    cfg: &RunConfig,
    out: &mut Artifacts,
    stem: &str,
    report: &T,
    csv: impl FnOnce() -> Result<Vec<u8>>,
) -> Result<()> {
    if cfg.output.formats.contains(&Format::Json) {
        let mut bytes = Vec::new();
        write_json(report, &mut bytes)?;
        out.write(&format!("{stem}.json"), &bytes)?;
    }
    if cfg.output.formats.contains(&Format::Csv) {
        out.write(&format!("{stem}.csv"), &csv()?)?;
    }
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

fn gates_csv(gates: &[Gate]) -> Result<Vec<u8>> {
    let mut s = String::from("name,passed,value,detail\n");
    for g in gates {
        writeln!(s, "\"{}\",{},{},\"{}\"", g.name.replace('"', "'"), g.passed, num(g.value), g.detail.replace('"', "'"))?;
    }
    Ok(s.into_bytes())
}

/// Final `ψ` of stream 0, re-simulated with the run's own propagator.
fn snapshot(cfg: &RunConfig, dt: f64, out: &mut Artifacts) -> Result<()> {
    let m = cfg.model.as_ref().expect("validated");
    let model = OuModel::new(m.cutoff(), m.grid(), m.eps(), m.sigma(), m.linearisation(), m.initial_law())?;
    let times = uniform_times(m.t_end(), dt)?;
    let prop = Propagator::new(&model, &times)?;
    let mut rng = path_rng(cfg.rng.seed, 0);
    let mut st = model.initial_state(&mut rng)?;
    for tr in &prop.steps {
        model.advance(&mut st, tr, &mut rng);
    }
    let mut bytes = Vec::new();
    write_container(&st.psi, &mut bytes)?;
    out.write("psi_path0.bin", &bytes)
}

fn run_tails(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let (m, t) = (cfg.model.as_ref().expect("validated"), cfg.tails.as_ref().expect("validated"));
    let r = tail_experiment(&TailConfig {
        eps: m.eps(),
        sigma: m.sigma(),
        t_end: m.t_end(),
        cutoff: m.cutoff(),
        grid: m.grid(),
        path: m.linearisation(),
        init: m.initial_law(),
        m_max: t.m_max,
        alphas: t.alphas.clone(),
        h_grid: t.h_grid.clone(),
        thresholds: t.thresholds,
        paths: t.paths,
        dt: t.dt,
        seed: cfg.rng.seed,
        threads: cfg.threads,
        min_r_squared: t.min_r_squared,
    })?;
    emit(cfg, out, "tails", &r, || {
        let mut b = Vec::new();
        r.write_csv(&mut b)?;
        Ok(b)
    })?;
    if cfg.output.snapshots {
        snapshot(cfg, t.dt, out)?;
    }
    Ok(Outcome { gates: r.gates })
}

fn run_probe(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let (m, p) = (cfg.model.as_ref().expect("validated"), cfg.probe.as_ref().expect("validated"));
    let r = pairing_probe(&ProbeConfig {
        eps: m.eps(),
        sigma: m.sigma(),
        t_end: m.t_end(),
        cutoff: m.cutoff(),
        grid: m.grid(),
        path: m.linearisation(),
        init: m.initial_law(),
        m: p.m,
        alpha: p.alpha,
        q0s: p.q0s.clone(),
        p: p.p,
        thresholds: p.thresholds,
        paths: p.paths,
        dt: p.dt,
        seed: cfg.rng.seed,
        threads: cfg.threads,
    })?;
    emit(cfg, out, "probe", &r, || {
        let mut b = Vec::new();
        r.write_csv(&mut b)?;
        Ok(b)
    })?;
    if cfg.output.snapshots {
        snapshot(cfg, p.dt, out)?;
    }
    Ok(Outcome { gates: r.gates })
}

#[derive(Serialize)]
struct StableReport {
    phi1: Phi1Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracking: Option<TrackingReport>,
}

fn run_stable(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let (m, s) = (cfg.model.as_ref().expect("validated"), cfg.stable.as_ref().expect("validated"));
    let drift = cfg.drift().expect("validated");
    let tracking = s
        .tracking
        .as_ref()
        .map(|tr| {
            tracking_experiment(&TrackingConfig {
                drift: drift.clone(),
                branch_seed: s.branch_seed,
                eps: tr.eps.clone(),
                t_end: m.t_end(),
                dt: tr.dt,
                cutoff: m.cutoff(),
                grid: m.grid(),
                expected_ratio: tr.expected_ratio.map(|e| (e, tr.ratio_tolerance)),
            })
        })
        .transpose()?;
    let phi1 = phi1_experiment(&Phi1Config {
        drift,
        branch_seed: s.branch_seed,
        sweeps: s
            .sweep
            .iter()
            .map(|w| Phi1Sweep {
                eps: w.eps,
                sigmas: w.sigmas.clone(),
                expected_ratio: w.expected_ratio,
                ratio_tolerance: w.ratio_tolerance,
            })
            .collect(),
        t_end: m.t_end(),
        cutoff: m.cutoff(),
        grid: m.grid(),
        gamma: s.gamma,
        nu: s.nu,
        holder_grid: s.holder_grid,
        paths: s.paths,
        dt_over_eps: s.dt_over_eps,
        record_stride: s.record_stride,
        seed: cfg.rng.seed,
        threads: cfg.threads,
        guard: s.guard,
    })?;
    let mut gates = phi1.gates.clone();
    if let Some(t) = &tracking {
        gates.extend(t.gates.iter().cloned());
    }
    let report = StableReport { phi1, tracking };
    emit(cfg, out, "stable", &report, || {
        let mut s = String::from("eps,sigma,median,q25,q75,max,samples,diverged,scaled_median\n");
        for p in &report.phi1.points {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                num(p.eps),
                num(p.sigma),
                num(p.sup_norm.median),
                num(p.sup_norm.q25),
                num(p.sup_norm.q75),
                num(p.sup_norm.max),
                p.sup_norm.samples,
                p.diverged,
                num(p.scaled_median)
            )?;
        }
        Ok(s.into_bytes())
    })?;
    Ok(Outcome { gates })
}

#[derive(Serialize)]
struct PitchforkReport {
    exit: ExitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    perp: Option<Phi1PerpReport>,
}

fn run_pitchfork(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome> {
    let (m, p) = (cfg.model.as_ref().expect("validated"), cfg.pitchfork.as_ref().expect("validated"));
    let exit = pitchfork_exit_experiment(&ExitConfig {
        eps: m.eps(),
        t_star: p.t_star,
        t_end: m.t_end(),
        sigmas: p.sigmas.clone(),
        h_minus_factor: p.h_minus_factor,
        tube: p.tube,
        cutoff: m.cutoff(),
        grid: m.grid(),
        paths: p.paths,
        dt: p.dt,
        survival_points: p.survival_points,
        seed: cfg.rng.seed,
        threads: cfg.threads,
        delay_tolerance: p.delay_tolerance,
        fluctuation_factor: p.fluctuation_factor,
    })?;
    let perp = p
        .perp
        .as_ref()
        .map(|q| {
            phi1perp_experiment(&Phi1PerpConfig {
                eps: m.eps(),
                path: spde_core::convolution::LinearisationPath::Constant(q.a),
                a0: q.a0,
                t_end: m.t_end(),
                cutoff: m.cutoff(),
                grid: m.grid(),
                gamma: q.gamma,
                holder_grid: q.holder_grid,
                scales: q.scales.clone(),
                sigma_factor: q.sigma_factor,
                h0_factor: q.h0_factor,
                paths: q.paths,
                dt: q.dt,
                record_stride: q.record_stride,
                seed: cfg.rng.seed,
                threads: cfg.threads,
                expected_exponent: q.expected_exponent.map(|e| (e, q.exponent_tolerance)),
            })
        })
        .transpose()?;
    let mut gates = exit.gates.clone();
    if let Some(q) = &perp {
        gates.extend(q.gates.iter().cloned());
    }
    let report = PitchforkReport { exit, perp };
    emit(cfg, out, "pitchfork", &report, || {
        let mut s = String::from(
            "sigma,h_minus,h_plus,paths,minus_exits,minus_censored,plus_exits,plus_censored,delay_median,scaled_delay,window_sd,window_sd_stderr,window_ratio,linear_ratio\n",
        );
        for e in &report.exit.series {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                num(e.sigma),
                num(e.h_minus),
                num(e.h_plus),
                e.paths,
                e.minus_exits,
                e.minus_censored,
                e.plus_exits,
                e.plus_censored,
                num(e.delay.median),
                num(e.scaled_delay),
                num(e.window_sd),
                num(e.window_sd_stderr),
                num(e.window_ratio),
                num(e.linear_ratio)
            )?;
        }
        Ok(s.into_bytes())
    })?;
    if cfg.output.formats.contains(&Format::Csv) {
        let mut s = String::from("sigma,t,survival\n");
        for e in &report.exit.series {
            for p in &e.minus_survival {
                writeln!(s, "{},{},{}", num(e.sigma), num(p.t), num(p.survival))?;
            }
        }
        out.write("pitchfork_survival.csv", s.as_bytes())?;
    }
    Ok(Outcome { gates })
}
