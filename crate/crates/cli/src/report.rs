//! Human-readable summary of a finished run, after checksum verification.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

use crate::manifest::{Manifest, Status};

/// Renders the report; integrity failures are errors.
pub fn render(path: &Path) -> Result<(String, Status)> {
    let (m, dir) = Manifest::load(path)?;
    let problems = m.verify(&dir);
    if !problems.is_empty() {
        bail!("integrity check failed:\n  {}", problems.join("\n  "));
    }
    let mut s = String::new();
    writeln!(s, "kind      {}", m.kind)?;
    writeln!(s, "status    {}", status_name(m.status))?;
    writeln!(s, "complete  {}", m.complete)?;
    writeln!(s, "seed      {}  ({})", m.seed, m.rng_protocol)?;
    writeln!(s, "config    sha256:{}", m.config_hash)?;
    if let Some(e) = &m.error {
        writeln!(s, "error     {e}")?;
    }
    if m.files.is_empty() {
        writeln!(s, "\nno artifacts recorded")?;
    } else {
        writeln!(s, "\nfiles ({} verified)", m.files.len())?;
        for f in &m.files {
            writeln!(s, "  {:<28} {:>10} bytes  {}", f.path, f.bytes, &f.sha256[..16])?;
        }
    }
    if !m.gates.is_empty() {
        writeln!(s, "\ngates")?;
        for g in &m.gates {
            writeln!(s, "  {} {:<44} {:>12.5e}  {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.value, g.detail)?;
        }
    }
    let json = m.files.iter().find(|f| f.path == format!("{}.json", m.kind));
    if let Some(f) = json {
        let text = fs::read_to_string(dir.join(&f.path)).with_context(|| format!("reading {}", f.path))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", f.path))?;
        writeln!(s)?;
        kind_table(&m.kind, &v, &mut s)?;
    }
    Ok((s, m.status))
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Running => "running (incomplete)",
        Status::Passed => "passed",
        Status::GateFailed => "gate_failed",
        Status::Error => "error",
    }
}

fn f(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    }
}

fn e(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4e}"),
        None => "-".into(),
    }
}

fn i(v: &Value) -> String {
    v.as_u64().map_or("-".into(), |x| x.to_string())
}

fn kind_table(kind: &str, v: &Value, s: &mut String) -> std::fmt::Result {
    let empty = Vec::new();
    let arr = |v: &Value, k: &str| v.get(k).and_then(Value::as_array).cloned().unwrap_or_else(|| empty.clone());
    match kind {
        "tails" => {
            writeln!(s, "{:>3} {:>7} {:>10} {:>10} {:>8}  fit", "m", "alpha", "kappa", "stderr", "R2")?;
            for c in arr(v, "curves") {
                let fit = &c["fit"];
                writeln!(
                    s,
                    "{:>3} {:>7} {:>10} {:>10} {:>8}  {}",
                    i(&c["m"]),
                    f(&c["alpha"]),
                    f(&fit["kappa"]),
                    f(&fit["kappa_stderr"]),
                    f(&fit["r_squared"]),
                    fit["status"].as_str().unwrap_or("-")
                )?;
            }
        }
        "probe" => {
            writeln!(s, "{:>3} {:>10} {:>10} {:>8}", "q0", "kappa", "stderr", "R2")?;
            for c in arr(v, "curves") {
                let fit = &c["fit"];
                writeln!(s, "{:>3} {:>10} {:>10} {:>8}", i(&c["q0"]), f(&fit["kappa"]), f(&fit["kappa_stderr"]), f(&fit["r_squared"]))?;
            }
        }
        "stable" => {
            writeln!(s, "{:>8} {:>10} {:>12} {:>9}", "eps", "sigma", "median", "diverged")?;
            for p in arr(&v["phi1"], "points") {
                writeln!(s, "{:>8} {:>10} {:>12} {:>9}", f(&p["eps"]), e(&p["sigma"]), e(&p["sup_norm"]["median"]), i(&p["diverged"]))?;
            }
            for r in arr(&v["phi1"], "ratios") {
                writeln!(s, "ratio eps={} sigma {} -> {}: {}", f(&r["eps"]), f(&r["sigma_from"]), f(&r["sigma_to"]), f(&r["ratio"]))?;
            }
            for p in arr(&v["tracking"], "points") {
                writeln!(s, "tracking eps={} distance={:.4e}", f(&p["eps"]), p["distance"].as_f64().unwrap_or(f64::NAN))?;
            }
        }
        "pitchfork" => {
            writeln!(s, "{:>10} {:>7} {:>9} {:>12} {:>12} {:>12}", "sigma", "paths", "censored", "scaled_delay", "window_ratio", "linear")?;
            for x in arr(&v["exit"], "series") {
                writeln!(
                    s,
                    "{:>10} {:>7} {:>9} {:>12} {:>12} {:>12}",
                    e(&x["sigma"]),
                    i(&x["paths"]),
                    i(&x["minus_censored"]),
                    f(&x["scaled_delay"]),
                    f(&x["window_ratio"]),
                    f(&x["linear_ratio"])
                )?;
            }
            if let Some(x) = v["perp"]["exponent"].as_f64() {
                writeln!(s, "perpendicular exponent {x:.4}")?;
            }
        }
        "schauder" => {
            writeln!(s, "M coarse {}  M fine {}  relative change {}", f(&v["m_coarse"]), f(&v["m_fine"]), f(&v["relative_change"]))?;
        }
        _ => {}
    }
    Ok(())
}
