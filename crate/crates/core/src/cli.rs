//! Scenario files and the batch runner behind the `decohere` binary.
//!
//! A scenario is one JSON document:
//!
//! ```json
//! {
//!   "params": { "m": 1, "omega": 1, "lambda_spin": 0.3, "epsilon": 0.5, "gamma": 2, "hbar": 1, "kB": 1 },
//!   "bath": { "regime": "zero-temperature" },
//!   "initial": { "kind": "coherent", "x0": 2.0, "p0": 0.0 },
//!   "spin": { "a": [0.7071067811865476, 0], "b": [0.7071067811865476, 0] },
//!   "grid": { "n_R": 128, "n_r": 128, "R_extent": 12, "r_extent": 12 },
//!   "times": { "t_max": 2.0, "n_samples": 20 },
//!   "engines": ["analytic"],
//!   "observables": ["trace", "coherence_norm"],
//!   "output": { "dir": "out" }
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::Error;
use crate::grids::{self, GridSpec, Representation, SectorField};
use crate::observables::{self, TimeSeries};
use crate::oracle::{self, PdeRunConfig, Scheme};
use crate::params::{self, Bath, DerivedConstants, PhysicalParams, SectorLabel, SpinAmplitudes};
use crate::states::{self, ApparatusState, DensityMatrix};

pub const VERSION: &str = concat!("decohere ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Model(Error::InvalidParams(_)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub m: f64,
    pub omega: f64,
    pub lambda_spin: f64,
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "kB", default = "one")]
    pub kb: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Coherent { x0: f64, p0: f64 },
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    Cat { x0: f64, p0: f64, phase: f64 },
    Fock { n: u32 },
    /// Field dump of the apparatus block, relative to the config file.
    CustomGrid { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub a: Complex64,
    pub b: Complex64,
    /// Rescale `(a, b)` to unit norm instead of rejecting it.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesConfig {
    List(Vec<f64>),
    Range { t_max: f64, n_samples: usize },
}

impl TimesConfig {
    /// `Range` samples `n_samples` points evenly on `[0, t_max]`.
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let times = match self {
            TimesConfig::List(v) => v.clone(),
            TimesConfig::Range { t_max, n_samples } => {
                if *n_samples < 2 {
                    return Err(CliError::Config("times.n_samples must be at least 2".into()));
                }
                (0..*n_samples)
                    .map(|k| t_max * k as f64 / (*n_samples - 1) as f64)
                    .collect()
            }
        };
        if times.is_empty() {
            return Err(CliError::Config("times must not be empty".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "times must be non-negative, finite and strictly increasing".into(),
            ));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Engine {
    Analytic,
    OdeOracle,
    PdeOracle,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::OdeOracle => "ode-oracle",
            Engine::PdeOracle => "pde-oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Dump every sector at every time.
    #[serde(default)]
    pub fields: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Spectral
}

fn default_cfl() -> f64 {
    0.9
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            cfl: default_cfl(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default = "default_ode_steps")]
    pub steps: usize,
}

fn default_ode_steps() -> usize {
    200
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            steps: default_ode_steps(),
        }
    }
}

/// Raw scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: ParamsConfig,
    pub bath: Bath,
    pub initial: InitialConfig,
    pub spin: SpinConfig,
    pub grid: GridSpec,
    pub times: TimesConfig,
    pub engines: Vec<Engine>,
    pub observables: Vec<String>,
    pub output: OutputConfig,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub ode: OdeConfig,
}

pub const OBSERVABLES: &[&str] = &[
    "trace",
    "purity",
    "linear_entropy",
    "coherence_norm",
    "coherence_sup",
    "pointer_separation",
    "position_mean_up",
    "position_mean_down",
    "position_variance_up",
    "position_variance_down",
    "r_variance_up",
    "r_variance_down",
    "pointer_fidelity_up",
    "pointer_fidelity_down",
];

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub initial: ApparatusState,
    pub amps: SpinAmplitudes,
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub engines: Vec<Engine>,
    pub observables: Vec<String>,
    pub output: OutputConfig,
    pub pde: PdeConfig,
    pub ode: OdeConfig,
}

/// Parses a scenario document, reporting the failing field and position.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            path: if path == "." { origin.to_string() } else { format!("{origin}: {path}") },
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

impl ParamsConfig {
    pub fn with_bath(&self, bath: Bath) -> PhysicalParams {
        PhysicalParams {
            m: self.m,
            omega: self.omega,
            lambda_spin: self.lambda_spin,
            epsilon: self.epsilon,
            gamma: self.gamma,
            bath,
            hbar: self.hbar,
            kb: self.kb,
        }
    }
}

/// Checks a parsed document and resolves relative paths against `base`.
pub fn build_scenario(cfg: &ScenarioConfig, base: &Path) -> Result<Scenario, CliError> {
    let params = cfg.params.with_bath(cfg.bath);
    let v = params::validate(&params);
    if !v.is_ok() {
        let msgs: Vec<String> = v.errors().map(|i| format!("{}: {}", i.field, i.message)).collect();
        return Err(CliError::Config(format!("invalid parameters: {}", msgs.join("; "))));
    }
    params::derive_constants(&params).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.grid.check().map_err(|e| CliError::Config(e.to_string()))?;
    let amps = if cfg.spin.normalize {
        SpinAmplitudes::normalized(cfg.spin.a, cfg.spin.b)
    } else {
        SpinAmplitudes::new(cfg.spin.a, cfg.spin.b)
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let times = cfg.times.resolve()?;
    if cfg.engines.is_empty() {
        return Err(CliError::Config("at least one engine is required".into()));
    }
    for o in &cfg.observables {
        if !OBSERVABLES.contains(&o.as_str()) {
            return Err(CliError::Config(format!(
                "unknown observable `{o}`; valid names: {}",
                OBSERVABLES.join(", ")
            )));
        }
    }
    if !(cfg.pde.cfl > 0.0 && cfg.pde.cfl <= 1.0) {
        return Err(CliError::Config(format!("pde.cfl {} must lie in (0, 1]", cfg.pde.cfl)));
    }
    if cfg.ode.steps < 16 {
        return Err(CliError::Config("ode.steps must be at least 16".into()));
    }
    let initial = match &cfg.initial {
        InitialConfig::Coherent { x0, p0 } => ApparatusState::Coherent { x0: *x0, p0: *p0 },
        InitialConfig::Gaussian { x0, p0, sigma } => ApparatusState::Gaussian {
            x0: *x0,
            p0: *p0,
            sigma: *sigma,
        },
        InitialConfig::Cat { x0, p0, phase } => ApparatusState::Cat {
            x0: *x0,
            p0: *p0,
            phase: *phase,
        },
        InitialConfig::Fock { n } => ApparatusState::Fock { n: *n },
        InitialConfig::CustomGrid { path } => {
            let full = base.join(path);
            let file = fs::File::open(&full).map_err(|e| io_err(&full, e))?;
            let (field, _) = grids::read_field_csv(std::io::BufReader::new(file))
                .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
            ApparatusState::CustomGrid(field)
        }
    };
    Ok(Scenario {
        params,
        initial,
        amps,
        grid: cfg.grid,
        times,
        engines: {
            let mut e = cfg.engines.clone();
            e.sort();
            e.dedup();
            e
        },
        observables: cfg.observables.clone(),
        output: OutputConfig {
            dir: base.join(&cfg.output.dir),
            fields: cfg.output.fields,
        },
        pde: cfg.pde,
        ode: cfg.ode,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let cfg = parse_config(&text, &path.display().to_string())?;
    build_scenario(&cfg, path.parent().unwrap_or(Path::new(".")))
}

/// Derived constants as a flat, ordered record.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub params: PhysicalParams,
    #[serde(rename = "D")]
    pub diffusion: f64,
    pub nbar: f64,
    pub lambda_plus: [f64; 2],
    pub lambda_minus: [f64; 2],
    #[serde(rename = "Gamma")]
    pub gamma_char: [f64; 2],
    pub tau_r: f64,
    pub tau_d: f64,
    pub alpha_sq: f64,
    pub delta: f64,
    pub lambda_db: Option<f64>,
    /// `tau_D / (tau_R / (2 |alpha|^2))`.
    pub tau_d_over_alpha_form: f64,
    pub tau_d_de_broglie_form: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn constants_report(p: &PhysicalParams) -> Result<ConstantsReport, CliError> {
    let dc = params::derive_constants(p)?;
    let c = |z: Complex64| [z.re, z.im];
    Ok(ConstantsReport {
        params: *p,
        diffusion: dc.diffusion,
        nbar: dc.nbar,
        lambda_plus: c(dc.lambda_plus),
        lambda_minus: c(dc.lambda_minus),
        gamma_char: c(dc.gamma_char),
        tau_r: dc.tau_r,
        tau_d: dc.tau_d,
        alpha_sq: dc.alpha_sq,
        delta: dc.delta_sep,
        lambda_db: dc.lambda_db,
        tau_d_over_alpha_form: dc.tau_d_over_alpha_form(),
        tau_d_de_broglie_form: dc.tau_d_de_broglie_form(),
        warnings: params::validate(p).warnings().map(|w| w.message.clone()).collect(),
    })
}

fn fmt_complex(z: [f64; 2]) -> String {
    if z[1] == 0.0 {
        format!("{:.10}", z[0])
    } else {
        format!("{:.10} {:+.10}i", z[0], z[1])
    }
}

/// Human-readable constants table.
pub fn format_constants(r: &ConstantsReport) -> String {
    let mut rows: Vec<(&str, String, &str)> = vec![
        ("D", format!("{:.10}", r.diffusion), "m gamma hbar omega"),
        ("nbar", format!("{:.10}", r.nbar), "quanta"),
        ("lambda+", fmt_complex(r.lambda_plus), "hbar/(m omega)"),
        ("lambda-", fmt_complex(r.lambda_minus), "hbar/(m omega)"),
        ("Gamma", fmt_complex(r.gamma_char), "hbar/(m omega)"),
        ("tau_R", format!("{:.10}", r.tau_r), "time"),
        ("tau_D", format!("{:.10}", r.tau_d), "time"),
        ("|alpha|^2", format!("{:.10}", r.alpha_sq), "-"),
        ("Delta", format!("{:.10}", r.delta), "length"),
        (
            "lambda_dB",
            r.lambda_db.map_or("-".to_string(), |v| format!("{v:.10}")),
            "length",
        ),
        (
            "tau_D/(tau_R/2|alpha|^2)",
            format!("{:.10}", r.tau_d_over_alpha_form),
            "-",
        ),
    ];
    if let Some(v) = r.tau_d_de_broglie_form {
        rows.push(("tau_R (lambda_dB/Delta)^2", format!("{v:.10}"), "time"));
    }
    let mut out = String::new();
    for (name, value, unit) in rows {
        out.push_str(&format!("{name:<26} {value:>28}  {unit}\n"));
    }
    for w in &r.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

/// Observable values of one engine at one time.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossEngineError {
    pub engine: &'static str,
    pub t: f64,
    /// Relative L2 error of each sector against the analytic engine.
    pub sectors: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub engine: &'static str,
    pub window: (f64, f64),
    pub tau: Option<f64>,
    pub r_squared: Option<f64>,
    pub tau_d: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub constants: ConstantsReport,
    pub samples: BTreeMap<&'static str, Vec<Sample>>,
    pub cross_engine: Vec<CrossEngineError>,
    pub fits: Vec<FitReport>,
    pub files: Vec<String>,
}

fn observable(name: &str, rho: &DensityMatrix, dc: &DerivedConstants) -> crate::error::Result<f64> {
    let p = &dc.params;
    let up = rho.sector(SectorLabel::UpUp);
    let down = rho.sector(SectorLabel::DownDown);
    let pointer_x = |s: SectorLabel| s.branch() * dc.pointer_offset();
    Ok(match name {
        "trace" => observables::total_trace(rho),
        "purity" => observables::purity(rho)?,
        "linear_entropy" => observables::linear_entropy(rho)?,
        "coherence_norm" => observables::coherence_norm(rho)?,
        "coherence_sup" => observables::coherence_sup(rho)?,
        "pointer_separation" => observables::pointer_separation(rho)?,
        "position_mean_up" => observables::position_marginal(up)?.mean(),
        "position_mean_down" => observables::position_marginal(down)?.mean(),
        "position_variance_up" => observables::position_marginal(up)?.variance(),
        "position_variance_down" => observables::position_marginal(down)?.variance(),
        "r_variance_up" => observables::r_variance(up)?,
        "r_variance_down" => observables::r_variance(down)?,
        "pointer_fidelity_up" => observables::coherent_fidelity(up, pointer_x(SectorLabel::UpUp), 0.0, p)?,
        "pointer_fidelity_down" => observables::coherent_fidelity(down, pointer_x(SectorLabel::DownDown), 0.0, p)?,
        other => return Err(Error::InvalidRun(format!("unknown observable {other}"))),
    })
}

/// Evolves by integrating each grid point's characteristic numerically.
pub fn ode_propagate(rho0: &DensityMatrix, t: f64, dc: &DerivedConstants, steps: usize) -> crate::error::Result<DensityMatrix> {
    let mut out = rho0.clone();
    out.time = t;
    if t == 0.0 {
        return Ok(out);
    }
    let g = rho0.grid();
    for s in SectorLabel::ALL {
        let src = rho0.sector(s);
        if src.values.iter().all(|v| v.norm() == 0.0) {
            continue;
        }
        let sampler = src.sampler();
        let w = rho0.amps.weight(s);
        let field = &mut out.sectors[s.index()];
        for ((i, j), v) in field.values.indexed_iter_mut() {
            let c = oracle::integrate_characteristic(g.wavenumber(i), g.diff(j), t, s, dc, steps)?;
            let initial = match rho0.apparatus.as_deref() {
                Some(ev) => ev.eval(c.q, c.r) * w,
                None => sampler.sample(c.q, c.r)?,
            };
            *v = initial * c.logw.exp();
        }
    }
    Ok(out)
}

fn header_lines(s: &Scenario) -> Vec<String> {
    vec![
        VERSION.to_string(),
        format!(
            "params={}",
            serde_json::to_string(&s.params).expect("parameters serialize")
        ),
        format!("spin=a:{} b:{}", s.amps.a, s.amps.b),
        format!("initial={}", summary_of_state(&s.initial)),
    ]
}

fn summary_of_state(st: &ApparatusState) -> String {
    match st {
        ApparatusState::CustomGrid(f) => format!("custom-grid {}x{}", f.grid.n_center, f.grid.n_diff),
        other => format!("{other:?}"),
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| io_err(path, e))?;
    use std::io::Write;
    w.flush().map_err(|e| io_err(path, e))
}

/// Evolution of one engine at every requested time.
fn run_engine(
    engine: Engine,
    s: &Scenario,
    rho0: &DensityMatrix,
    dc: &DerivedConstants,
    diag_out: &mut Vec<oracle::PdeDiagnostic>,
) -> crate::error::Result<Vec<DensityMatrix>> {
    let mut states = Vec::with_capacity(s.times.len());
    match engine {
        Engine::Analytic => {
            for &t in &s.times {
                states.push(analytic::propagate(rho0, t, dc)?);
            }
        }
        Engine::OdeOracle => {
            for &t in &s.times {
                states.push(ode_propagate(rho0, t, dc, s.ode.steps)?);
            }
        }
        Engine::PdeOracle => {
            let mut current = rho0.clone();
            for &t in &s.times {
                let span = t - current.time;
                if span > 0.0 {
                    let cfg = PdeRunConfig::auto(s.grid, dc, s.pde.scheme, s.pde.cfl, span);
                    let out = oracle::integrate_pde(&current, &cfg, dc)?;
                    diag_out.extend(out.diagnostics.into_iter().map(|mut d| {
                        d.t += current.time;
                        d
                    }));
                    current = out.state;
                    current.time = t;
                }
                states.push(current.clone());
            }
        }
    }
    Ok(states)
}

fn file_suffix(engine: Engine) -> String {
    match engine {
        Engine::Analytic => String::new(),
        other => format!("_{}", other.name()),
    }
}

/// Runs every engine, writes all outputs and returns the summary.
///
/// On an engine failure the summary is still written, with `status` set to
/// `"failed"`, before the error is returned.
pub fn run_scenario(s: &Scenario) -> Result<RunReport, CliError> {
    fs::create_dir_all(&s.output.dir).map_err(|e| io_err(&s.output.dir, e))?;
    let constants = constants_report(&s.params)?;
    let mut report = RunReport {
        version: VERSION,
        status: "ok",
        error: None,
        constants,
        samples: BTreeMap::new(),
        cross_engine: Vec::new(),
        fits: Vec::new(),
        files: Vec::new(),
    };
    let cpath = s.output.dir.join("constants.json");
    write_file(&cpath, |w| {
        serde_json::to_writer_pretty(&mut *w, &report.constants).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    report.files.push("constants.json".into());

    let result = run_engines(s, &mut report);
    if let Err(e) = &result {
        report.status = "failed";
        report.error = Some(e.to_string());
    }
    let spath = s.output.dir.join("summary.json");
    write_file(&spath, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    result.map(|_| report)
}

use std::io::Write as _;

fn run_engines(s: &Scenario, report: &mut RunReport) -> Result<(), CliError> {
    let dc = params::derive_constants(&s.params)?;
    let rho0 = states::assemble_initial(&s.initial, s.amps, s.grid, &s.params)?;
    let header = header_lines(s);
    let mut analytic_states: Option<Vec<DensityMatrix>> = None;
    for &engine in &s.engines {
        let mut diags = Vec::new();
        let evolved = run_engine(engine, s, &rho0, &dc, &mut diags)?;
        let mut samples = Vec::with_capacity(evolved.len());
        for (t, rho) in s.times.iter().zip(&evolved) {
            let mut values = BTreeMap::new();
            for name in &s.observables {
                values.insert(name.clone(), observable(name, rho, &dc)?);
            }
            samples.push(Sample { t: *t, values });
        }
        let suffix = file_suffix(engine);
        for name in &s.observables {
            let series = TimeSeries::new(
                name.clone(),
                s.times.clone(),
                samples.iter().map(|x| x.values[name]).collect(),
            )?;
            let file = format!("series_{name}{suffix}.csv");
            let mut h = header.clone();
            h.push(format!("engine={}", engine.name()));
            write_file(&s.output.dir.join(&file), |w| observables::write_series_csv(&series, &h, w))?;
            report.files.push(file);
            if name == "coherence_norm" {
                report.fits.push(fit_report(engine, &series, &dc));
            }
        }
        if s.output.fields {
            for (t, rho) in s.times.iter().zip(&evolved) {
                for sector in &rho.sectors {
                    let file = format!("field_{}_{}{suffix}.csv", sector.label.tag(), t);
                    write_file(&s.output.dir.join(&file), |w| grids::write_field_csv(sector, *t, &header, w))?;
                    report.files.push(file);
                }
            }
        }
        if engine == Engine::PdeOracle {
            let file = "pde_diagnostics.csv".to_string();
            write_file(&s.output.dir.join(&file), |w| {
                oracle::write_diagnostics_csv(&diags, &header, w).map_err(std::io::Error::other)
            })?;
            report.files.push(file);
        }
        if let Some(reference) = &analytic_states {
            for (t, (a, b)) in s.times.iter().zip(reference.iter().zip(&evolved)) {
                let sectors = SectorLabel::ALL
                    .iter()
                    .map(|l| (l.tag(), relative_error(a.sector(*l), b.sector(*l))))
                    .collect();
                report.cross_engine.push(CrossEngineError {
                    engine: engine.name(),
                    t: *t,
                    sectors,
                });
            }
        }
        if engine == Engine::Analytic {
            analytic_states = Some(evolved);
        }
        report.samples.insert(engine.name(), samples);
    }
    Ok(())
}

fn relative_error(reference: &SectorField, other: &SectorField) -> f64 {
    debug_assert_eq!(reference.rep, Representation::PartialFourier);
    oracle::relative_l2(&other.values, &reference.values)
}

fn fit_report(engine: Engine, series: &TimeSeries, dc: &DerivedConstants) -> FitReport {
    let window = observables::default_fit_window(dc);
    let (tau, r_squared, error) = match observables::fit_decoherence_time(series, Some(window)) {
        Ok(f) => (Some(f.tau), Some(f.r_squared), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    FitReport {
        engine: engine.name(),
        window,
        tau,
        r_squared,
        tau_d: dc.tau_d,
        error,
    }
}

/// Applies command-line overrides to a parsed scenario.
pub fn apply_overrides(
    s: &mut Scenario,
    output_dir: Option<PathBuf>,
    engines: &[Engine],
    grid_points: Option<usize>,
) -> Result<(), CliError> {
    if let Some(d) = output_dir {
        s.output.dir = d;
    }
    if !engines.is_empty() {
        let mut e = engines.to_vec();
        e.sort();
        e.dedup();
        s.engines = e;
    }
    if let Some(n) = grid_points {
        if matches!(s.initial, ApparatusState::CustomGrid(_)) {
            return Err(CliError::Config("--grid cannot resize a custom-grid initial state".into()));
        }
        s.grid = s.grid.with_points(n).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}
