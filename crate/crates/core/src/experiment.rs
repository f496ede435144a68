//! Self-describing experiment files and their execution.
//!
//! ```json
//! {"command": "simulate",
//!  "curve": {"kind": "circle", "radius": 1.0},
//!  "params": {"n": 8, "beta": 2.0, "dt": 1e-3, "t_end": 5.0},
//!  "output_dir": "out", "seed": 7, "format": "csv"}
//! ```
//!
//! Every artifact is written atomically; reruns with the same file and seed
//! reproduce the numeric output byte for byte.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::coulomb::{Configuration, InverseTemperature};
use crate::curve::{ArcLengthCurve, CurveSpec};
use crate::diagnostics::{self, DiagnosticsOptions};
use crate::error::{Error, Result};
use crate::fekete::{euler_path, gradient_flow, transfinite_diameter, FeketeResult};
use crate::functionals::{hydro_residual, rate_i, rate_j, CurveTestFunction, DiscreteMeasure, ParamPath};
use crate::gibbs::{sample_chains, SamplerSettings};
use crate::io;
use crate::sde::{simulate, Mode, SimulationConfig, StepPolicy, DEFAULT_FRAMES};

pub const RESULT_SCHEMA_VERSION: u32 = 1;
/// Relative accuracy of the arc-length tables built for experiments.
pub const CURVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Sample,
    Fekete,
    Capacity,
    Rate,
    Hydro,
    Diagnose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn default_curve() -> CurveSpec {
    CurveSpec::Circle { radius: 1.0 }
}

fn default_output() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_curve")]
    pub curve: CurveSpec,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
}

fn path_error<E: std::fmt::Display>(prefix: &str, err: serde_path_to_error::Error<E>) -> Error {
    let path = err.path().to_string();
    let field = match (prefix, path.as_str()) {
        (p, ".") => p.to_string(),
        ("", s) => s.to_string(),
        (p, s) => format!("{p}.{s}"),
    };
    Error::config(if field.is_empty() { "<root>".to_string() } else { field }, err.inner().to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let value = Value::Object(self.params.clone());
        serde_path_to_error::deserialize(value).map_err(|e| path_error("params", e))
    }

    fn build_curve(&self) -> Result<ArcLengthCurve> {
        ArcLengthCurve::new(self.curve.clone(), CURVE_TOL).map_err(|e| Error::config("curve", e.to_string()))
    }

    /// Parses command parameters and the curve without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.command != Command::Diagnose {
            self.build_curve()?;
        }
        match self.command {
            Command::Simulate => self.params::<SimulateParams>()?.check(),
            Command::Sample => self.params::<SampleParams>()?.check(),
            Command::Fekete => self.params::<FeketeParams>()?.check(),
            Command::Capacity => self.params::<CapacityParams>()?.check(),
            Command::Rate => self.params::<RateParams>()?.check(),
            Command::Hydro => self.params::<HydroParams>()?.check(),
            Command::Diagnose => self.params::<DiagnoseParams>().map(|_| ()),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be at least {min}, got {v}")))
    }
}

/// Initial positions: a named layout or explicit arc-length values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Start {
    Layout(Layout),
    Positions(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Equal arc-length spacing from `s = 0`.
    Equidistant,
    /// Equal spacing packed into the first tenth of the curve.
    Clustered,
    /// Sorted uniform positions drawn from the run seed.
    Random,
}

impl Start {
    pub fn build(&self, n: usize, l: f64, seed: u64) -> Result<Configuration> {
        let config = match self {
            Start::Layout(Layout::Equidistant) => Configuration::equidistant(n, l, 0.0),
            Start::Layout(Layout::Clustered) => clustered(n, l),
            Start::Layout(Layout::Random) => random_configuration(n, l, seed),
            Start::Positions(x) if x.len() != n => {
                return Err(Error::config("params.initial", format!("expected {n} positions, got {}", x.len())))
            }
            Start::Positions(x) => Configuration::new(x.clone(), l),
        };
        config.map_err(|e| Error::config("params.initial", e.to_string()))
    }
}

/// `n` points equally spaced in `[0, l/10)`.
pub fn clustered(n: usize, l: f64) -> Result<Configuration> {
    Configuration::new((0..n).map(|i| 0.1 * l * i as f64 / n as f64).collect(), l)
}

/// Sorted uniform positions in `[0, l)`, redrawn until strictly ordered.
pub fn random_configuration(n: usize, l: f64, seed: u64) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * l).collect();
        x.sort_by(f64::total_cmp);
        if let Ok(c) = Configuration::new(x, l) {
            return Ok(c);
        }
    }
}

fn default_start() -> Start {
    Start::Layout(Layout::Equidistant)
}

fn random_start() -> Start {
    Start::Layout(Layout::Random)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    n: usize,
    beta: Option<f64>,
    kappa: Option<f64>,
    #[serde(default = "default_mode")]
    mode: Mode,
    dt: f64,
    t_end: f64,
    #[serde(default = "default_start")]
    initial: Start,
    #[serde(default = "default_frames")]
    n_frames: usize,
    #[serde(default)]
    step_policy: StepPolicy,
    #[serde(default)]
    record_curve_points: bool,
}

fn default_mode() -> Mode {
    Mode::BetaForm
}

fn default_frames() -> usize {
    DEFAULT_FRAMES
}

impl SimulateParams {
    fn temperature(&self) -> Result<InverseTemperature> {
        match (self.beta, self.kappa) {
            (Some(b), None) => {
                if !(b >= 1.0) {
                    return Err(Error::config(
                        "params.beta",
                        format!("β = {b} is outside the existence regime β ≥ 1 of the parametrization process"),
                    ));
                }
                InverseTemperature::from_beta(b).map_err(|e| Error::config("params.beta", e.to_string()))
            }
            (None, Some(k)) => {
                if !(k <= 2.0) {
                    return Err(Error::config(
                        "params.kappa",
                        format!("κ = {k} means β < 1, outside the existence regime β ≥ 1"),
                    ));
                }
                InverseTemperature::from_kappa(k).map_err(|e| Error::config("params.kappa", e.to_string()))
            }
            _ => Err(Error::config("params.beta", "give exactly one of `beta` and `kappa`")),
        }
    }

    fn check(&self) -> Result<()> {
        at_least("params.n", self.n, 1)?;
        self.temperature()?;
        positive("params.dt", self.dt)?;
        positive("params.t_end", self.t_end)?;
        if self.dt > self.t_end {
            return Err(Error::config("params.dt", "must not exceed t_end"));
        }
        at_least("params.n_frames", self.n_frames, 1)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleParams {
    n: usize,
    beta: f64,
    n_samples: usize,
    #[serde(default = "default_burn_in")]
    burn_in: usize,
    #[serde(default = "one")]
    thin: usize,
    #[serde(default = "one")]
    chains: usize,
}

fn default_burn_in() -> usize {
    1000
}

fn one() -> usize {
    1
}

impl SampleParams {
    fn check(&self) -> Result<()> {
        at_least("params.n", self.n, 1)?;
        positive("params.beta", self.beta)?;
        at_least("params.n_samples", self.n_samples, 1)?;
        at_least("params.thin", self.thin, 1)?;
        at_least("params.chains", self.chains, 1)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeketeParams {
    n: usize,
    dt: Option<f64>,
    #[serde(default = "default_flow_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "random_start")]
    initial: Start,
}

fn default_flow_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    1_000_000
}

impl FeketeParams {
    fn check(&self) -> Result<()> {
        at_least("params.n", self.n, 2)?;
        if let Some(dt) = self.dt {
            positive("params.dt", dt)?;
        }
        positive("params.tol", self.tol)?;
        at_least("params.max_iter", self.max_iter, 1)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityParams {
    n_list: Vec<usize>,
    #[serde(default = "default_flow_tol")]
    tol: f64,
}

impl CapacityParams {
    fn check(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::config("params.n_list", "must not be empty"));
        }
        if self.n_list.iter().any(|&n| n < 2) || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("params.n_list", "must be strictly increasing with every N ≥ 2"));
        }
        positive("params.tol", self.tol)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateParams {
    n: usize,
    #[serde(default = "default_rate_dt")]
    dt: f64,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "random_start")]
    initial: Start,
}

fn default_rate_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

impl RateParams {
    fn check(&self) -> Result<()> {
        at_least("params.n", self.n, 2)?;
        positive("params.dt", self.dt)?;
        positive("params.horizon", self.horizon)?;
        if self.horizon < 4.0 * self.dt {
            return Err(Error::config("params.horizon", "must span at least four steps of 2·dt"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasureKind {
    Equidistant,
    Fekete,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HydroParams {
    #[serde(default = "default_points")]
    n_points: usize,
    #[serde(default = "default_functions")]
    functions: Vec<String>,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_measure")]
    measure: MeasureKind,
}

fn default_points() -> usize {
    1 << 10
}

/// Test functions used when none are given.
pub fn default_functions() -> Vec<String> {
    ["x", "x^2 - y^2", "x^3*y - y^2", "(x + 2*y)^4", "x^5 - 3*x*y^2 + y"].map(String::from).to_vec()
}

fn default_beta() -> f64 {
    2.0
}

fn default_measure() -> MeasureKind {
    MeasureKind::Equidistant
}

impl HydroParams {
    fn check(&self) -> Result<()> {
        at_least("params.n_points", self.n_points, 2)?;
        positive("params.beta", self.beta)?;
        for (i, f) in self.functions.iter().enumerate() {
            CurveTestFunction::parse(f).map_err(|e| Error::config(format!("params.functions[{i}]"), e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnoseParams {
    #[serde(default)]
    corrupt_drift: bool,
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    /// Diagnose runs report failed checks here instead of erroring.
    pub all_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    version: &'static str,
    command: Command,
    seed: u64,
    curve: &'a CurveSpec,
    result: T,
}

#[derive(Debug, Clone, Serialize)]
struct FeketeJson {
    n: usize,
    points: Vec<f64>,
    curve_points: Vec<[f64; 2]>,
    discriminant: f64,
    log_discriminant: f64,
    energy: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

impl From<&FeketeResult> for FeketeJson {
    fn from(r: &FeketeResult) -> Self {
        Self {
            n: r.points.len(),
            points: r.points.positions().to_vec(),
            curve_points: r.curve_points.iter().map(|z| [z.re, z.im]).collect(),
            discriminant: r.discriminant,
            log_discriminant: r.log_discriminant,
            energy: r.energy,
            grad_norm: r.grad_norm,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

/// One row of a rate or residual report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub functional: String,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub value: f64,
    pub error_estimate: f64,
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    artifacts: Vec<PathBuf>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.cfg.output_dir.join(name);
        io::write_atomic(&path, bytes)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, result: T) -> Result<()> {
        let env = Envelope {
            schema_version: RESULT_SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION"),
            command: self.cfg.command,
            seed: self.cfg.seed,
            curve: &self.cfg.curve,
            result,
        };
        let bytes = io::to_json(&env)?;
        self.bytes(name, &bytes)
    }
}

/// Validates the configuration, runs the command and writes its artifacts into
/// `output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::config("output_dir", format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    let mut w = Writer { cfg, artifacts: Vec::new() };
    let mut all_passed = true;
    match cfg.command {
        Command::Simulate => run_simulate(cfg, &mut w)?,
        Command::Sample => run_sample(cfg, &mut w)?,
        Command::Fekete => run_fekete(cfg, &mut w)?,
        Command::Capacity => run_capacity(cfg, &mut w)?,
        Command::Rate => run_rate(cfg, &mut w)?,
        Command::Hydro => run_hydro(cfg, &mut w)?,
        Command::Diagnose => {
            let p: DiagnoseParams = cfg.params()?;
            let report = diagnostics::diagnose(&DiagnosticsOptions { seed: cfg.seed, corrupt_drift: p.corrupt_drift });
            all_passed = report.passed;
            let bytes = io::to_json(&report)?;
            w.bytes("diagnostics.json", &bytes)?;
        }
    }
    Ok(RunOutcome { artifacts: w.artifacts, all_passed })
}

fn run_simulate(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: SimulateParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let initial = p.initial.build(p.n, curve.length(), cfg.seed)?;
    let mut sim = SimulationConfig::new(&curve, p.temperature()?, p.mode, p.dt, p.t_end, cfg.seed, initial);
    sim.n_frames = p.n_frames;
    sim.step_policy = p.step_policy;
    sim.record_curve_points = p.record_curve_points || cfg.format == Format::Json;
    let record = simulate(&sim)?;
    match cfg.format {
        Format::Csv => {
            w.bytes("trajectory.csv", &io::trajectory_csv(&record)?)?;
            w.bytes("trajectory.meta.json", &io::to_json(&io::trajectory_meta(&record))?)
        }
        Format::Json => w.bytes("trajectory.json", &io::to_json(&io::trajectory_json(&record))?),
    }
}

fn run_sample(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: SampleParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let settings = SamplerSettings { n_samples: p.n_samples, burn_in: p.burn_in, thin: p.thin };
    let batch = sample_chains(&curve, p.beta, p.n, settings, cfg.seed, p.chains)?;
    match cfg.format {
        Format::Csv => {
            w.bytes("samples.csv", &io::samples_csv(&batch)?)?;
            w.bytes("samples.meta.json", &io::to_json(&io::samples_meta(&batch))?)
        }
        Format::Json => w.bytes("samples.json", &io::to_json(&io::samples_json(&batch))?),
    }
}

fn run_fekete(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: FeketeParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let l = curve.length();
    let start = p.initial.build(p.n, l, cfg.seed)?;
    let gap = l / p.n as f64;
    let dt = p.dt.unwrap_or(0.4 * gap * gap);
    let result = gradient_flow(&curve, &start, dt, p.tol, p.max_iter)?;
    w.json("fekete.json", FeketeJson::from(&result))?;
    result.into_converged().map(|_| ())
}

fn run_capacity(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: CapacityParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let table = transfinite_diameter(&curve, &p.n_list, p.tol)?;
    w.json("capacity.json", table)
}

fn run_rate(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: RateParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let start = p.initial.build(p.n, curve.length(), cfg.seed)?;
    let evaluate = |dt: f64| -> Result<[f64; 3]> {
        let steps = (p.horizon / dt).round() as usize;
        let path = ParamPath::new(dt, euler_path(&curve, &start, dt, steps)?)?;
        let on_curve = path.map(|x| x.iter().map(|&s| curve.point(s)).collect::<Vec<Complex64>>());
        Ok([rate_i(&curve, &path)?, rate_j(&curve, &on_curve)?, rate_i(&curve, &path.reversed())?])
    };
    let fine = evaluate(p.dt)?;
    let coarse = evaluate(2.0 * p.dt)?;
    let rows: Vec<ReportRow> = ["rate_i", "rate_j", "rate_i_reversed"]
        .iter()
        .enumerate()
        .map(|(k, name)| ReportRow {
            functional: (*name).into(),
            horizon: Some(p.horizon),
            dt: Some(p.dt),
            value: fine[k],
            error_estimate: (fine[k] - coarse[k]).abs(),
        })
        .collect();
    w.json("rate.json", rows)
}

fn run_hydro(cfg: &ExperimentConfig, w: &mut Writer<'_>) -> Result<()> {
    let p: HydroParams = cfg.params()?;
    let curve = cfg.build_curve()?;
    let measure = |n: usize| -> Result<DiscreteMeasure> {
        match p.measure {
            MeasureKind::Equidistant => DiscreteMeasure::equidistant(&curve, n),
            MeasureKind::Fekete => {
                let l = curve.length();
                let gap = l / n as f64;
                let start = Configuration::equidistant(n, l, 0.0)?;
                let r = gradient_flow(&curve, &start, 0.4 * gap * gap, 1e-9, 1_000_000)?.into_converged()?;
                DiscreteMeasure::empirical(&r.points)
            }
        }
    };
    let fine = measure(p.n_points)?;
    let coarse = measure((p.n_points / 2).max(2))?;
    let rows = p
        .functions
        .iter()
        .map(|expr| {
            let f = CurveTestFunction::parse(expr)?;
            let value = hydro_residual(&curve, &f, &fine, p.beta);
            Ok(ReportRow {
                functional: format!("hydro[{expr}]"),
                horizon: None,
                dt: None,
                value,
                error_estimate: (value - hydro_residual(&curve, &f, &coarse, p.beta)).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    w.json("hydro.json", rows)
}
