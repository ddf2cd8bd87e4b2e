//! Run configuration: a TOML file walked key by key so that unknown keys and
//! every constraint violation are reported together.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use spde_core::convolution::{InitialLaw, LinearisationPath};
use spde_core::experiments::TubeConvention;
use spde_core::solver::{Coefficient, DriftPolynomial};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Tails,
    Stable,
    Pitchfork,
    Selftest,
    Schauder,
    Probe,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tails" => Kind::Tails,
            "stable" => Kind::Stable,
            "pitchfork" => Kind::Pitchfork,
            "selftest" => Kind::Selftest,
            "schauder" => Kind::Schauder,
            "probe" => Kind::Probe,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Tails => "tails",
            Kind::Stable => "stable",
            Kind::Pitchfork => "pitchfork",
            Kind::Selftest => "selftest",
            Kind::Schauder => "schauder",
            Kind::Probe => "probe",
        }
    }

    /// Model keys consumed by this kind; `path` and `init` are optional.
    fn model_keys(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Kind::Tails | Kind::Probe => (&["eps", "sigma", "t_end", "cutoff", "grid"], &["path", "init"]),
            Kind::Stable => (&["t_end", "cutoff", "grid"], &[]),
            Kind::Pitchfork => (&["eps", "t_end", "cutoff", "grid"], &[]),
            Kind::Schauder => (&["cutoff", "grid"], &[]),
            Kind::Selftest => (&[], &[]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathConfig {
    Constant { value: f64 },
    Affine { offset: f64, slope: f64 },
    Polynomial { coefficients: Vec<f64> },
    Crossing { t_star: f64 },
}

impl PathConfig {
    pub fn build(&self) -> LinearisationPath {
        match self {
            PathConfig::Constant { value } => LinearisationPath::Constant(*value),
            PathConfig::Affine { offset, slope } => LinearisationPath::Affine { offset: *offset, slope: *slope },
            PathConfig::Polynomial { coefficients } => LinearisationPath::Polynomial(coefficients.clone()),
            PathConfig::Crossing { t_star } => LinearisationPath::crossing(*t_star),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RngConfig {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<Format>,
    /// Writes the final `ψ` of path 0 as a field container (tails, probe).
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialLaw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
}

impl ModelConfig {
    pub fn eps(&self) -> f64 {
        self.eps.expect("validated")
    }
    pub fn sigma(&self) -> f64 {
        self.sigma.expect("validated")
    }
    pub fn t_end(&self) -> f64 {
        self.t_end.expect("validated")
    }
    pub fn cutoff(&self) -> usize {
        self.cutoff.expect("validated")
    }
    pub fn grid(&self) -> usize {
        self.grid.expect("validated")
    }
    pub fn linearisation(&self) -> LinearisationPath {
        self.path.as_ref().map_or(LinearisationPath::Constant(-1.0), PathConfig::build)
    }
    pub fn initial_law(&self) -> InitialLaw {
        self.init.unwrap_or(InitialLaw::Stationary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftConfig {
    /// `A_0, …, A_n`: each a constant or polynomial coefficients in `t`.
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailsConfig {
    pub m_max: usize,
    pub alphas: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub thresholds: usize,
    pub min_r_squared: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub eps: f64,
    pub sigmas: Vec<f64>,
    pub ratio_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingSection {
    pub eps: Vec<f64>,
    pub dt: f64,
    pub ratio_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableConfig {
    pub branch_seed: f64,
    pub gamma: f64,
    pub nu: f64,
    pub holder_grid: usize,
    pub paths: usize,
    pub dt_over_eps: f64,
    pub record_stride: usize,
    pub guard: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingSection>,
    pub sweep: Vec<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerpConfig {
    pub a: f64,
    pub a0: f64,
    pub scales: Vec<f64>,
    pub sigma_factor: f64,
    pub h0_factor: f64,
    pub paths: usize,
    pub dt: f64,
    pub gamma: f64,
    pub holder_grid: usize,
    pub record_stride: usize,
    pub exponent_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitchforkConfig {
    pub t_star: f64,
    pub sigmas: Vec<f64>,
    pub h_minus_factor: f64,
    pub tube: TubeConvention,
    pub paths: usize,
    pub dt: f64,
    pub survival_points: usize,
    pub delay_tolerance: f64,
    pub fluctuation_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perp: Option<PerpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestSection {
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchauderSection {
    pub alpha: f64,
    pub beta: f64,
    pub times: usize,
    pub t_min: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSection {
    pub m: usize,
    pub alpha: f64,
    pub q0s: Vec<u32>,
    pub p: f64,
    pub thresholds: usize,
    pub paths: usize,
    pub dt: f64,
}

/// Effective configuration with every default filled in. Scalars precede
/// tables so that the serialised form is valid TOML.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: Kind,
    pub threads: usize,
    pub rng: RngConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tails: Option<TailsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable: Option<StableConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitchfork: Option<PitchforkConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schauder: Option<SchauderSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
}

/// Every problem found while loading, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn drift(&self) -> Option<DriftPolynomial> {
        self.drift.as_ref().map(|d| DriftPolynomial::new(d.coefficients.clone()).expect("validated"))
    }

    /// The part of the config that determines results: output location and
    /// thread count are excluded.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.output.dir = String::new();
        c.to_toml()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let table: Table = toml::from_str(text).map_err(|e: toml::de::Error| ConfigErrors(vec![format!("malformed TOML: {e}")]))?;
    let mut errors = Vec::new();
    let cfg = read_config(table, &mut errors);
    match cfg {
        Some(cfg) if errors.is_empty() => {
            validate(&cfg, &mut errors);
            if errors.is_empty() {
                Ok(cfg)
            } else {
                Err(ConfigErrors(errors))
            }
        }
        _ => Err(ConfigErrors(errors)),
    }
}

/// Consumes keys from one table; leftovers are reported as unknown.
struct Reader<'e> {
    prefix: String,
    table: Table,
    errors: &'e mut Vec<String>,
}

impl<'e> Reader<'e> {
    fn new(prefix: &str, table: Table, errors: &'e mut Vec<String>) -> Self {
        Self { prefix: prefix.to_string(), table, errors }
    }

    fn name(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn missing(&mut self, key: &str) {
        let n = self.name(key);
        self.errors.push(format!("missing key `{n}`"));
    }

    fn wrong(&mut self, key: &str, what: &str) {
        let n = self.name(key);
        self.errors.push(format!("`{n}` must be {what}"));
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn value<T>(&mut self, key: &str, what: &str, conv: impl Fn(&Value) -> Option<T>) -> Option<T> {
        let v = self.table.remove(key)?;
        let out = conv(&v);
        if out.is_none() {
            self.wrong(key, what);
        }
        out
    }

    fn req<T>(&mut self, key: &str, got: Option<T>) -> Option<T> {
        if got.is_none() && !self.errors.iter().any(|e| e.contains(&format!("`{}`", self.name(key)))) {
            self.missing(key);
        }
        got
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        self.value(key, "a number", as_f64)
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        let v = self.opt_f64(key);
        self.req(key, v)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        let present = self.has(key);
        self.opt_f64(key).unwrap_or(if present { f64::NAN } else { default })
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        self.value(key, "a non-negative integer", |v| v.as_integer().and_then(|i| usize::try_from(i).ok()))
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        let v = self.opt_usize(key);
        self.req(key, v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        self.opt_usize(key).unwrap_or(default)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        self.value(key, "a boolean", Value::as_bool).unwrap_or(default)
    }

    fn opt_str(&mut self, key: &str) -> Option<String> {
        self.value(key, "a string", |v| v.as_str().map(str::to_string))
    }

    fn opt_f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        self.value(key, "an array of numbers", |v| v.as_array()?.iter().map(as_f64).collect())
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.opt_f64_list(key);
        self.req(key, v)
    }

    fn opt_u32_list(&mut self, key: &str) -> Option<Vec<u32>> {
        self.value(key, "an array of non-negative integers", |v| {
            v.as_array()?.iter().map(|x| x.as_integer().and_then(|i| u32::try_from(i).ok())).collect()
        })
    }

    fn opt_table(&mut self, key: &str) -> Option<Table> {
        self.value(key, "a table", |v| v.as_table().cloned())
    }

    fn finish(self) {
        for key in self.table.keys() {
            let n = if self.prefix.is_empty() { key.clone() } else { format!("{}.{key}", self.prefix) };
            self.errors.push(format!("unknown key `{n}`"));
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn read_config(table: Table, errors: &mut Vec<String>) -> Option<RunConfig> {
    let mut top = Reader::new("", table, errors);
    let kind_name = top.opt_str("kind");
    let kind = match kind_name.as_deref() {
        None => {
            top.missing("kind");
            None
        }
        Some(s) => match Kind::parse(s) {
            Some(k) => Some(k),
            None => {
                top.errors.push(format!(
                    "unknown kind `{s}` (expected tails, stable, pitchfork, selftest, schauder or probe)"
                ));
                None
            }
        },
    };
    let threads = top.usize_or("threads", 0);
    let rng = top.opt_table("rng").map(|t| {
        let mut r = Reader::new("rng", t, top.errors);
        let seed = r.value("seed", "a non-negative integer", |v| v.as_integer().and_then(|i| u64::try_from(i).ok()));
        let seed = r.req("seed", seed);
        r.finish();
        seed
    });
    let seed = match rng {
        Some(s) => s,
        None => {
            top.missing("rng.seed");
            None
        }
    };
    let output = {
        let t = top.opt_table("output").unwrap_or_default();
        let mut r = Reader::new("output", t, top.errors);
        let dir = r.opt_str("dir").unwrap_or_else(|| "out".into());
        let formats = match r.value("formats", "an array of strings", |v| {
            v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect::<Option<Vec<_>>>()
        }) {
            None => vec![Format::Json, Format::Csv],
            Some(list) => {
                let mut out = Vec::new();
                for f in list {
                    match f.as_str() {
                        "json" => out.push(Format::Json),
                        "csv" => out.push(Format::Csv),
                        other => r.errors.push(format!("`output.formats` has unknown format `{other}`")),
                    }
                }
                out
            }
        };
        let snapshots = r.bool_or("snapshots", false);
        r.finish();
        OutputConfig { dir, formats, snapshots }
    };
    let Some(kind) = kind else {
        // Without a kind the sections cannot be checked; report stray keys only.
        top.table.retain(|k, _| {
            let k: &str = k;
            !["model", "drift", "tails", "stable", "pitchfork", "selftest", "schauder", "probe"].contains(&k)
        });
        top.finish();
        return None;
    };
    let model = read_model(kind, &mut top);
    let drift = if kind == Kind::Stable {
        match top.opt_table("drift") {
            Some(t) => read_drift(t, top.errors),
            None => {
                top.missing("drift");
                None
            }
        }
    } else {
        None
    };
    let section = |name: &str, top: &mut Reader| -> Option<Table> {
        let t = top.opt_table(name);
        if t.is_none() {
            top.errors.push(format!("missing section [{name}] required by kind {}", kind.name()));
        }
        t
    };
    let mut cfg = RunConfig {
        kind,
        threads,
        rng: RngConfig { seed: seed.unwrap_or(0) },
        output,
        model,
        drift,
        tails: None,
        stable: None,
        pitchfork: None,
        selftest: None,
        schauder: None,
        probe: None,
    };
    let eps = cfg.model.as_ref().and_then(|m| m.eps);
    match kind {
        Kind::Tails => cfg.tails = section("tails", &mut top).and_then(|t| read_tails(t, eps, top.errors)),
        Kind::Stable => cfg.stable = section("stable", &mut top).and_then(|t| read_stable(t, top.errors)),
        Kind::Pitchfork => cfg.pitchfork = section("pitchfork", &mut top).and_then(|t| read_pitchfork(t, eps, top.errors)),
        Kind::Selftest => {
            let t = top.opt_table("selftest").unwrap_or_default();
            let mut r = Reader::new("selftest", t, top.errors);
            let quick = r.bool_or("quick", false);
            r.finish();
            cfg.selftest = Some(SelftestSection { quick });
        }
        Kind::Schauder => cfg.schauder = section("schauder", &mut top).and_then(|t| read_schauder(t, top.errors)),
        Kind::Probe => cfg.probe = section("probe", &mut top).and_then(|t| read_probe(t, eps, top.errors)),
    }
    top.finish();
    Some(cfg)
}

fn read_model(kind: Kind, top: &mut Reader) -> Option<ModelConfig> {
    let (required, optional) = kind.model_keys();
    if required.is_empty() && optional.is_empty() {
        return None;
    }
    let Some(t) = top.opt_table("model") else {
        top.errors.push(format!("missing section [model] required by kind {}", kind.name()));
        return None;
    };
    let mut r = Reader::new("model", t, top.errors);
    let mut m = ModelConfig { eps: None, sigma: None, t_end: None, cutoff: None, grid: None, init: None, path: None };
    for &key in required {
        match key {
            "eps" => m.eps = r.f64("eps"),
            "sigma" => m.sigma = r.f64("sigma"),
            "t_end" => m.t_end = r.f64("t_end"),
            "cutoff" => m.cutoff = r.usize("cutoff"),
            "grid" => m.grid = r.usize("grid"),
            _ => unreachable!(),
        }
    }
    if optional.contains(&"init") {
        m.init = Some(match r.opt_str("init").as_deref() {
            None | Some("stationary") => InitialLaw::Stationary,
            Some("zero") => InitialLaw::Zero,
            Some(other) => {
                r.errors.push(format!("`model.init` must be `stationary` or `zero`, got `{other}`"));
                InitialLaw::Stationary
            }
        });
    }
    if optional.contains(&"path") {
        m.path = Some(match r.opt_table("path") {
            None => PathConfig::Constant { value: -1.0 },
            Some(t) => read_path(t, r.errors).unwrap_or(PathConfig::Constant { value: -1.0 }),
        });
    }
    let leftovers: Vec<String> = r.table.keys().cloned().collect();
    for key in leftovers {
        r.table.remove(&key);
        r.errors.push(format!("unknown key `model.{key}` (not used by kind {})", kind.name()));
    }
    r.finish();
    Some(m)
}

fn read_path(t: Table, errors: &mut Vec<String>) -> Option<PathConfig> {
    let mut r = Reader::new("model.path", t, errors);
    let kind = r.opt_str("kind");
    let out = match kind.as_deref() {
        None => {
            r.missing("kind");
            None
        }
        Some("constant") => r.f64("value").map(|value| PathConfig::Constant { value }),
        Some("affine") => {
            let (o, s) = (r.f64("offset"), r.f64("slope"));
            Some(PathConfig::Affine { offset: o?, slope: s? })
        }
        Some("polynomial") => r.f64_list("coefficients").map(|coefficients| PathConfig::Polynomial { coefficients }),
        Some("crossing") => r.f64("t_star").map(|t_star| PathConfig::Crossing { t_star }),
        Some(other) => {
            r.errors.push(format!(
                "`model.path.kind` must be constant, affine, polynomial or crossing, got `{other}`"
            ));
            None
        }
    };
    r.finish();
    out
}

fn read_drift(t: Table, errors: &mut Vec<String>) -> Option<DriftConfig> {
    let mut r = Reader::new("drift", t, errors);
    let coefficients = r.value("coefficients", "an array of numbers or arrays of numbers", |v| {
        v.as_array()?
            .iter()
            .map(|c| match c {
                Value::Array(a) => a.iter().map(as_f64).collect::<Option<Vec<_>>>().map(Coefficient::Polynomial),
                other => as_f64(other).map(Coefficient::Constant),
            })
            .collect::<Option<Vec<_>>>()
    });
    let coefficients = r.req("coefficients", coefficients);
    r.finish();
    coefficients.map(|coefficients| DriftConfig { coefficients })
}

fn read_tails(t: Table, eps: Option<f64>, errors: &mut Vec<String>) -> Option<TailsConfig> {
    let mut r = Reader::new("tails", t, errors);
    let m_max = r.usize("m_max");
    let alphas = r.opt_f64_list("alphas").unwrap_or_else(|| vec![-0.5]);
    let paths = r.usize("paths");
    let dt = r.f64_or("dt", eps.unwrap_or(f64::NAN) / 10.0);
    let thresholds = r.usize_or("thresholds", 24);
    let min_r_squared = r.f64_or("min_r_squared", 0.9);
    let h_grid = r.opt_f64_list("h_grid");
    r.finish();
    Some(TailsConfig { m_max: m_max?, alphas, paths: paths?, dt, thresholds, min_r_squared, h_grid })
}

fn read_stable(t: Table, errors: &mut Vec<String>) -> Option<StableConfig> {
    let mut r = Reader::new("stable", t, errors);
    let branch_seed = r.f64("branch_seed");
    let gamma = r.f64_or("gamma", 1.0);
    let nu = r.f64_or("nu", 0.25);
    let holder_grid = r.usize_or("holder_grid", 32);
    let paths = r.usize("paths");
    let dt_over_eps = r.f64_or("dt_over_eps", 0.05);
    let record_stride = r.usize_or("record_stride", 2);
    let guard = r.f64_or("guard", spde_core::solver::DEFAULT_DIVERGENCE_GUARD);
    let tracking = r.opt_table("tracking").and_then(|t| {
        let mut s = Reader::new("stable.tracking", t, r.errors);
        let eps = s.f64_list("eps");
        let dt = s.f64_or("dt", 0.02);
        let expected_ratio = s.opt_f64("expected_ratio");
        let ratio_tolerance = s.f64_or("ratio_tolerance", 0.3);
        s.finish();
        Some(TrackingSection { eps: eps?, dt, ratio_tolerance, expected_ratio })
    });
    let sweeps = match r.table.remove("sweep") {
        None => {
            r.missing("sweep");
            Vec::new()
        }
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for (i, item) in items.into_iter().enumerate() {
                let Value::Table(t) = item else {
                    r.errors.push(format!("`stable.sweep[{i}]` must be a table"));
                    continue;
                };
                let mut s = Reader::new(&format!("stable.sweep[{i}]"), t, r.errors);
                let eps = s.f64("eps");
                let sigmas = s.f64_list("sigmas");
                let expected_ratio = s.opt_f64("expected_ratio");
                let ratio_tolerance = s.f64_or("ratio_tolerance", 0.5);
                s.finish();
                if let (Some(eps), Some(sigmas)) = (eps, sigmas) {
                    out.push(SweepConfig { eps, sigmas, ratio_tolerance, expected_ratio });
                }
            }
            out
        }
        Some(_) => {
            r.wrong("sweep", "an array of tables ([[stable.sweep]])");
            Vec::new()
        }
    };
    r.finish();
    Some(StableConfig {
        branch_seed: branch_seed?,
        gamma,
        nu,
        holder_grid,
        paths: paths?,
        dt_over_eps,
        record_stride,
        guard,
        tracking,
        sweep: sweeps,
    })
}

fn read_pitchfork(t: Table, eps: Option<f64>, errors: &mut Vec<String>) -> Option<PitchforkConfig> {
    let mut r = Reader::new("pitchfork", t, errors);
    let t_star = r.f64("t_star");
    let sigmas = r.f64_list("sigmas");
    let h_minus_factor = r.f64_or("h_minus_factor", 3.0);
    let tube = match r.opt_str("tube").as_deref() {
        None | Some("sqrt_variance") => TubeConvention::SqrtVariance,
        Some("literal") => TubeConvention::Literal,
        Some(other) => {
            r.errors.push(format!("`pitchfork.tube` must be `sqrt_variance` or `literal`, got `{other}`"));
            TubeConvention::SqrtVariance
        }
    };
    let paths = r.usize("paths");
    let default_dt = eps.unwrap_or(f64::NAN) / 20.0;
    let dt = r.f64_or("dt", default_dt);
    let survival_points = r.usize_or("survival_points", 11);
    let delay_tolerance = r.f64_or("delay_tolerance", 0.3);
    let fluctuation_factor = r.f64_or("fluctuation_factor", 2.0);
    let perp = r.opt_table("perp").and_then(|t| {
        let mut s = Reader::new("pitchfork.perp", t, r.errors);
        let a = s.f64_or("a", -1.0);
        let a0 = s.f64_or("a0", 1.0);
        let scales = s.f64_list("scales");
        let sigma_factor = s.f64_or("sigma_factor", 1.0);
        let h0_factor = s.f64_or("h0_factor", 3.0);
        let paths = s.usize("paths");
        let dt = s.f64_or("dt", default_dt);
        let gamma = s.f64_or("gamma", 1.0);
        let holder_grid = s.usize_or("holder_grid", 32);
        let record_stride = s.usize_or("record_stride", 2);
        let expected_exponent = s.opt_f64("expected_exponent");
        let exponent_tolerance = s.f64_or("exponent_tolerance", 0.5);
        s.finish();
        Some(PerpConfig {
            a,
            a0,
            scales: scales?,
            sigma_factor,
            h0_factor,
            paths: paths?,
            dt,
            gamma,
            holder_grid,
            record_stride,
            exponent_tolerance,
            expected_exponent,
        })
    });
    r.finish();
    Some(PitchforkConfig {
        t_star: t_star?,
        sigmas: sigmas?,
        h_minus_factor,
        tube,
        paths: paths?,
        dt,
        survival_points,
        delay_tolerance,
        fluctuation_factor,
        perp,
    })
}

fn read_schauder(t: Table, errors: &mut Vec<String>) -> Option<SchauderSection> {
    let mut r = Reader::new("schauder", t, errors);
    let alpha = r.f64("alpha");
    let beta = r.f64("beta");
    let times = r.usize_or("times", 200);
    let t_min = r.f64_or("t_min", 1e-6);
    let tolerance = r.f64_or("tolerance", 0.05);
    r.finish();
    Some(SchauderSection { alpha: alpha?, beta: beta?, times, t_min, tolerance })
}

fn read_probe(t: Table, eps: Option<f64>, errors: &mut Vec<String>) -> Option<ProbeSection> {
    let mut r = Reader::new("probe", t, errors);
    let m = r.usize("m");
    let alpha = r.f64_or("alpha", -0.5);
    let q0s = r.opt_u32_list("q0s").unwrap_or_else(|| vec![0, 1, 2, 3, 4]);
    let p = r.f64_or("p", 2.0);
    let thresholds = r.usize_or("thresholds", 16);
    let paths = r.usize("paths");
    let dt = r.f64_or("dt", eps.unwrap_or(f64::NAN) / 10.0);
    r.finish();
    Some(ProbeSection { m: m?, alpha, q0s, p, thresholds, paths: paths?, dt })
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("`{name}` must be positive and finite (got {v})"));
    }
}

fn non_empty<T>(errors: &mut Vec<String>, name: &str, v: &[T]) {
    if v.is_empty() {
        errors.push(format!("`{name}` must be non-empty"));
    }
}

/// Grid rule for a degree-`n` drift: `M ≥ (n + 1)(2N + 1)`.
fn drift_grid_rule(errors: &mut Vec<String>, n: usize, cutoff: usize, grid: usize) {
    let need = (n + 1) * (2 * cutoff + 1);
    if grid < need {
        errors.push(format!("`model.grid` = {grid} is below (n+1)(2N+1) = {need} for drift degree n = {n}"));
    }
}

/// Grid rule for Wick powers up to degree `m`: `M ≥ (m + 1) N + 1`.
fn wick_grid_rule(errors: &mut Vec<String>, m: usize, cutoff: usize, grid: usize) {
    let need = (m + 1) * cutoff + 1;
    if grid < need {
        errors.push(format!("`model.grid` = {grid} is below (m+1)N+1 = {need} for Wick powers of degree {m}"));
    }
}

fn validate(cfg: &RunConfig, errors: &mut Vec<String>) {
    if let Some(m) = &cfg.model {
        for (name, v) in [("model.eps", m.eps), ("model.t_end", m.t_end)] {
            if let Some(v) = v {
                positive(errors, name, v);
            }
        }
        if let Some(s) = m.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                errors.push(format!("`model.sigma` must be non-negative (got {s})"));
            }
        }
        if let (Some(n), Some(g)) = (m.cutoff, m.grid) {
            if g < 2 * n + 1 {
                errors.push(format!("`model.grid` = {g} cannot resolve cutoff {n} (need at least {})", 2 * n + 1));
            }
        }
    }
    let (cutoff, grid) = cfg.model.as_ref().map_or((0, 0), |m| (m.cutoff.unwrap_or(0), m.grid.unwrap_or(0)));
    if let Some(t) = &cfg.tails {
        if t.m_max == 0 {
            errors.push("`tails.m_max` must be at least 1".into());
        }
        if t.alphas.iter().any(|&a| !(a < 0.0)) {
            errors.push("`tails.alphas` must all be negative".into());
        }
        non_empty(errors, "tails.alphas", &t.alphas);
        if t.paths < 1000 {
            errors.push(format!("`tails.paths` must be at least 1000 (got {})", t.paths));
        }
        let eps = cfg.model.as_ref().and_then(|m| m.eps).unwrap_or(f64::NAN);
        if !(t.dt > 0.0 && t.dt <= eps / 10.0 * (1.0 + 1e-12)) {
            errors.push(format!("`tails.dt` = {} must lie in (0, eps/10]", t.dt));
        }
        if let Some(h) = &t.h_grid {
            non_empty(errors, "tails.h_grid", h);
        }
        wick_grid_rule(errors, t.m_max, cutoff, grid);
    }
    if let (Some(s), Some(d)) = (&cfg.stable, &cfg.drift) {
        let n = d.coefficients.len().saturating_sub(1);
        if n < 3 || n % 2 == 0 {
            errors.push(format!("drift degree n = {n} must be odd and at least 3"));
        } else {
            let t_end = cfg.model.as_ref().and_then(|m| m.t_end).unwrap_or(1.0);
            let probe: Vec<f64> = (0..=64).map(|i| t_end * i as f64 / 64.0).collect();
            let lead = &d.coefficients[n];
            if let Some(t) = probe.iter().find(|&&t| !(lead.at(t) < 0.0)) {
                errors.push(format!("leading drift coefficient A_n must be negative, A_n({t}) = {}", lead.at(*t)));
            }
            drift_grid_rule(errors, n, cutoff, grid);
        }
        non_empty(errors, "stable.sweep", &s.sweep);
        for (i, sw) in s.sweep.iter().enumerate() {
            positive(errors, &format!("stable.sweep[{i}].eps"), sw.eps);
            non_empty(errors, &format!("stable.sweep[{i}].sigmas"), &sw.sigmas);
        }
        if !(s.gamma < 2.0) || !(s.nu < 1.0 - s.gamma / 2.0) {
            errors.push(format!("need gamma < 2 and nu < 1 - gamma/2 (gamma = {}, nu = {})", s.gamma, s.nu));
        }
        if s.paths == 0 || s.record_stride == 0 {
            errors.push("`stable.paths` and `stable.record_stride` must be positive".into());
        }
        positive(errors, "stable.dt_over_eps", s.dt_over_eps);
        if let Some(tr) = &s.tracking {
            non_empty(errors, "stable.tracking.eps", &tr.eps);
            positive(errors, "stable.tracking.dt", tr.dt);
        }
    }
    if let Some(p) = &cfg.pitchfork {
        non_empty(errors, "pitchfork.sigmas", &p.sigmas);
        if p.sigmas.iter().any(|&s| !(s >= 0.0)) {
            errors.push("`pitchfork.sigmas` must be non-negative".into());
        }
        if p.paths == 0 {
            errors.push("`pitchfork.paths` must be positive".into());
        }
        positive(errors, "pitchfork.dt", p.dt);
        if let Some(m) = &cfg.model {
            if let (Some(eps), Some(t_end)) = (m.eps, m.t_end) {
                if !(p.t_star + eps.sqrt() < t_end) {
                    errors.push("`pitchfork.t_star` + sqrt(eps) must lie before `model.t_end`".into());
                }
            }
        }
        drift_grid_rule(errors, 3, cutoff, grid);
        if let Some(q) = &p.perp {
            non_empty(errors, "pitchfork.perp.scales", &q.scales);
            if q.paths == 0 || q.record_stride == 0 {
                errors.push("`pitchfork.perp.paths` and `pitchfork.perp.record_stride` must be positive".into());
            }
            positive(errors, "pitchfork.perp.dt", q.dt);
        }
    }
    if let Some(s) = &cfg.schauder {
        if s.beta > s.alpha + 2.0 {
            errors.push(format!("need beta <= alpha + 2 (alpha = {}, beta = {})", s.alpha, s.beta));
        }
        if !(s.t_min > 0.0 && s.t_min < 1.0) || s.times < 2 {
            errors.push("`schauder.t_min` must lie in (0, 1) and `schauder.times` must be at least 2".into());
        }
        if cutoff == 0 {
            errors.push("`model.cutoff` must be at least 1".into());
        }
    }
    if let Some(p) = &cfg.probe {
        if p.m == 0 || !(p.alpha < 0.0) || !(p.p >= 2.0) {
            errors.push("`probe` needs m >= 1, alpha < 0 and p >= 2".into());
        }
        non_empty(errors, "probe.q0s", &p.q0s);
        if p.paths == 0 {
            errors.push("`probe.paths` must be positive".into());
        }
        let eps = cfg.model.as_ref().and_then(|m| m.eps).unwrap_or(f64::NAN);
        if !(p.dt > 0.0 && p.dt <= eps / 10.0 * (1.0 + 1e-12)) {
            errors.push(format!("`probe.dt` = {} must lie in (0, eps/10]", p.dt));
        }
        wick_grid_rule(errors, p.m, cutoff, grid);
    }
}
