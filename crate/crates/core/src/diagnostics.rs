//! Numerical self-checks. Each measurement function is scale-parameterized so
//! the same code backs the quick [`diagnose`] report and the full-size
//! acceptance suite.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{drift, Configuration, InverseTemperature};
use crate::curve::{unit_circle, ArcLengthCurve, CurveSpec};
use crate::error::{Error, Result};
use crate::experiment::{self, clustered, ExperimentConfig};
use crate::fekete::{euler_path, gradient_flow, transfinite_diameter};
use crate::functionals::{
    hydro_residual, particle_generator_check, rate_i, rate_j, CurveTestFunction, DiscreteMeasure, ParamPath,
};
use crate::gibbs::{sample_chains, stationarity_residual, DriftSign, GapBump, SamplerSettings};
use crate::sde::{final_states, Mode, NoiseSource, SimulationConfig, Simulator};
use crate::stats;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Semi-axes of the non-circular reference curve and its capacity `(a + b)/2`.
pub const ELLIPSE: (f64, f64) = (2.0, 1.0);
pub const ELLIPSE_CAPACITY: f64 = 1.5;

/// One line of a report. A check passes when `statistic ≤ threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self { name: name.into(), statistic, threshold, passed: statistic <= threshold, error: None }
    }

    fn failed(name: impl Into<String>, threshold: f64, err: &Error) -> Self {
        Self { name: name.into(), statistic: f64::INFINITY, threshold, passed: false, error: Some(err.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub schema_version: u32,
    pub version: String,
    pub seed: u64,
    pub corrupt_drift: bool,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiagnosticsOptions {
    pub seed: u64,
    /// Evaluates the stationarity residual with the drift sign flipped.
    pub corrupt_drift: bool,
}

pub fn ellipse() -> ArcLengthCurve {
    ArcLengthCurve::new(CurveSpec::Ellipse { a: ELLIPSE.0, b: ELLIPSE.1 }, experiment::CURVE_TOL)
        .expect("reference ellipse is valid")
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Equidistant points displaced by up to `jitter` of a gap each.
pub fn jittered(n: usize, l: f64, jitter: f64, seed: u64) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = l / n as f64;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + jitter * (2.0 * rng.random::<f64>() - 1.0)) * gap).collect();
    crate::sde::quotient_map(&x, l)
}

/// `(β/2)·Σ_{j≠i} ½cot((x_i − x_j)/2)`: the drift on the unit circle.
pub fn circle_drift_formula(x: &[f64], beta: f64) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let s: f64 = x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, xj)| 0.5 / ((xi - xj) / 2.0).tan()).sum();
            0.5 * beta * s
        })
        .collect()
}

/// Largest absolute deviation between the general drift on the unit circle and
/// the cotangent formula over random configurations with `2 ≤ N ≤ max_n`.
pub fn circle_drift_error(configs: usize, max_n: usize, beta: f64, seed: u64) -> Result<f64> {
    let c = unit_circle();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..configs {
        let n = rng.random_range(2..=max_n);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
        x.sort_by(f64::total_cmp);
        if Configuration::new(x.clone(), TAU).is_err() {
            continue;
        }
        let got = drift(&c, &x, beta)?;
        for (g, e) in got.iter().zip(circle_drift_formula(&x, beta)) {
            worst = worst.max((g - e).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeketeErrors {
    /// Largest `|Δ_N/N^N − 1|`.
    pub discriminant: f64,
    /// Largest `|gap − 2π/N|`.
    pub gaps: f64,
}

/// Gradient flow on the unit circle from one random start per `N`.
pub fn fekete_circle_errors(ns: &[usize], seed: u64) -> Result<FeketeErrors> {
    let c = unit_circle();
    let runs = ns
        .par_iter()
        .map(|&n| {
            let start = experiment::random_configuration(n, TAU, sub_seed(seed, n as u64))?;
            let gap = TAU / n as f64;
            let r = gradient_flow(&c, &start, 0.4 * gap * gap, 1e-11, 2_000_000)?.into_converged()?;
            let nf = n as f64;
            let disc = (r.log_discriminant - nf * nf.ln()).exp_m1().abs();
            let gaps = r.points.gaps().iter().map(|g| (g - gap).abs()).fold(0.0, f64::max);
            Ok((disc, gaps))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeketeErrors {
        discriminant: runs.iter().map(|r| r.0).fold(0.0, f64::max),
        gaps: runs.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

/// `(max_N |d_N − N^{1/(N−1)}|, max_k (d_{N_{k+1}} − d_{N_k}))` on the unit circle.
pub fn circle_capacity_errors(n_list: &[usize]) -> Result<(f64, f64)> {
    let table = transfinite_diameter(&unit_circle(), n_list, 1e-11)?;
    let pairs = table.pairs();
    let err = pairs
        .iter()
        .map(|&(n, d)| (d - (n as f64).powf(1.0 / (n as f64 - 1.0))).abs())
        .fold(0.0, f64::max);
    let rise = pairs.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    Ok((err, rise))
}

/// Relative error of the `c + a/N` extrapolated capacity of the reference
/// ellipse, and of the raw estimate at the largest `N`.
pub fn ellipse_capacity_errors(n_list: &[usize]) -> Result<(f64, f64)> {
    let table = transfinite_diameter(&ellipse(), n_list, 1e-10)?;
    let extrapolated = table
        .extrapolated
        .ok_or_else(|| Error::InvalidParameter("capacity extrapolation needs at least two sizes".into()))?;
    let raw = table.rows.last().map_or(f64::NAN, |r| r.estimate);
    Ok(((extrapolated / ELLIPSE_CAPACITY - 1.0).abs(), (raw / ELLIPSE_CAPACITY - 1.0).abs()))
}

/// Five bump test functions on the gaps of `n ∈ {2, 3}` unit-circle particles.
pub fn standard_bumps(n: usize) -> Result<Vec<GapBump>> {
    let specs: Vec<(Vec<f64>, Vec<f64>)> = match n {
        2 => vec![
            (vec![3.1], vec![1.5]),
            (vec![2.0], vec![1.0]),
            (vec![4.0], vec![1.2]),
            (vec![2.6], vec![0.6]),
            (vec![3.6], vec![2.0]),
        ],
        3 => vec![
            (vec![2.1, 2.1], vec![1.0, 1.0]),
            (vec![1.5, 2.5], vec![0.8, 0.9]),
            (vec![2.5, 1.6], vec![1.0, 0.7]),
            (vec![1.4, 2.4], vec![0.6, 0.8]),
            (vec![2.6, 2.0], vec![0.6, 0.9]),
        ],
        _ => return Err(Error::InvalidParameter(format!("standard bumps exist for N ∈ {{2, 3}}, not {n}"))),
    };
    specs.into_iter().map(|(c, w)| GapBump::new(c, w, TAU)).collect()
}

/// `|E[Lφ]|/stderr` for each standard bump, from MCMC samples at `β`.
pub fn stationarity_scores(n: usize, beta: f64, samples: usize, seed: u64, sign: DriftSign) -> Result<Vec<f64>> {
    let c = unit_circle();
    let chains = 4;
    let settings = SamplerSettings { n_samples: samples.div_ceil(chains), burn_in: 2000, thin: 2 };
    let batch = sample_chains(&c, beta, n, settings, seed, chains)?;
    standard_bumps(n)?
        .iter()
        .map(|f| {
            let r = stationarity_residual(&c, &batch, beta, f, sign)?;
            Ok(r.estimate.abs() / r.stderr)
        })
        .collect()
}

/// Size of a gap-law comparison between the SDE and the Metropolis sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSettings {
    pub n: usize,
    pub beta: f64,
    pub trajectories: usize,
    pub dt: f64,
    /// Increasing observation times.
    pub times: Vec<f64>,
    /// Metropolis samples per chain; four chains, thinned by `n` sweeps.
    pub mcmc_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    /// `(t, KS distance)` for each observation time.
    pub ks: Vec<(f64, f64)>,
    /// Nearest-neighbour gaps pooled from the SDE ensemble at each time.
    pub sde_gaps: usize,
    pub mcmc_gaps: usize,
    pub mcmc_ess: f64,
}

/// Nearest-neighbour gap of every particle.
pub fn nearest_neighbour_gaps(config: &Configuration) -> Vec<f64> {
    let g = config.gaps();
    let n = g.len();
    (0..n).map(|i| g[i].min(g[(i + n - 1) % n])).collect()
}

/// Kolmogorov–Smirnov distance of the pooled nearest-neighbour gap law of an
/// SDE ensemble from a clustered start, at several times, against MCMC samples.
pub fn gap_relaxation(s: &RelaxationSettings, seed: u64) -> Result<Relaxation> {
    let c = unit_circle();
    let chains = 4;
    let settings = SamplerSettings { n_samples: s.mcmc_samples, burn_in: 2000, thin: s.n };
    let batch = sample_chains(&c, s.beta, s.n, settings, sub_seed(seed, 1), chains)?;
    let mut reference: Vec<f64> = batch.samples.iter().flat_map(nearest_neighbour_gaps).collect();
    let first: Vec<f64> = batch.samples.iter().map(|x| nearest_neighbour_gaps(x)[0]).collect();
    let mcmc_ess = first
        .chunks(s.mcmc_samples)
        .map(stats::effective_sample_size)
        .sum::<f64>()
        * s.n as f64;

    let temperature = InverseTemperature::from_beta(s.beta)?;
    let start = clustered(s.n, TAU)?;
    let t_end = s.times.last().copied().unwrap_or(s.dt);
    let cfg = SimulationConfig::new(&c, temperature, Mode::BetaForm, s.dt, t_end, seed, start);
    let seeds: Vec<u64> = (0..s.trajectories as u64).map(|r| sub_seed(seed, 1000 + r)).collect();
    let ends = final_states(&cfg, &seeds, &s.times)?;
    reference.sort_by(f64::total_cmp);
    let ks = s
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let pooled: Vec<f64> = ends.iter().flat_map(|e| nearest_neighbour_gaps(&e[k])).collect();
            (t, stats::ks_two_sample(&pooled, &reference))
        })
        .collect();
    Ok(Relaxation {
        ks,
        sde_gaps: s.trajectories * s.n,
        mcmc_gaps: reference.len(),
        mcmc_ess,
    })
}

/// Monte-Carlo short-time moments at one step size `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovLevel {
    pub h: f64,
    /// Largest `|E[X(h) − x]/h − b(x)|` over coordinates, in standard errors.
    pub drift_z: f64,
    /// Largest `|Var[X(h) − x]/h − 1|` over coordinates, in standard errors.
    pub variance_z: f64,
    /// `‖E[X(h) − x − W(h)]/h − b(x)‖`: the drift bias with the driving noise
    /// subtracted as a control variate.
    pub drift_bias: f64,
}

/// Short-time increments from `x` with `β`-form noise, over step sizes
/// `h0, h0/2, …` (`levels` of them), each resolved by `substeps` Euler steps.
#[allow(clippy::too_many_arguments)]
pub fn kolmogorov_levels(
    curve: &ArcLengthCurve,
    x: &Configuration,
    beta: f64,
    h0: f64,
    levels: usize,
    replicas: usize,
    substeps: usize,
    seed: u64,
) -> Result<Vec<KolmogorovLevel>> {
    let l = curve.length();
    let n = x.len();
    let b = drift(curve, x.positions(), beta)?;
    let temperature = InverseTemperature::from_beta(beta)?;
    (0..levels)
        .map(|level| {
            let h = h0 / f64::powi(2.0, level as i32);
            let dt = h / substeps as f64;
            let base = SimulationConfig::new(curve, temperature, Mode::BetaForm, dt, h, 0, x.clone());
            let runs = (0..replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let mut cfg = base.clone();
                    cfg.seed = sub_seed(seed, ((level as u64) << 40) + r);
                    let mut sim = Simulator::new(&cfg)?;
                    let mut noise = NoiseSource::new(cfg.seed);
                    let mut w = vec![0.0; n];
                    let mut xi = vec![0.0; n];
                    for k in 0..substeps as u64 {
                        sim.step()?;
                        noise.fill(k, 0, &mut xi);
                        w.iter_mut().zip(&xi).for_each(|(w, z)| *w += dt.sqrt() * z);
                    }
                    let d: Vec<f64> = sim
                        .positions()
                        .iter()
                        .zip(x.positions())
                        .map(|(a, b)| {
                            let d = a - b;
                            d - l * (d / l).round()
                        })
                        .collect();
                    Ok((d, w))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut drift_z: f64 = 0.0;
            let mut variance_z: f64 = 0.0;
            let mut bias2 = 0.0;
            for (i, &bi) in b.iter().enumerate().take(n) {
                let d: Vec<f64> = runs.iter().map(|r| r.0[i]).collect();
                let (mean, se) = stats::mean_and_stderr(&d);
                drift_z = drift_z.max((mean / h - bi).abs() / (se / h));
                let sq: Vec<f64> = d.iter().map(|v| (v - mean).powi(2)).collect();
                let (var, var_se) = stats::mean_and_stderr(&sq);
                variance_z = variance_z.max((var / h - 1.0).abs() / (var_se / h));
                let cv: Vec<f64> = runs.iter().map(|r| r.0[i] - r.1[i]).collect();
                let (cv_mean, _) = stats::mean_and_stderr(&cv);
                bias2 += (cv_mean / h - bi).powi(2);
            }
            Ok(KolmogorovLevel { h, drift_z, variance_z, drift_bias: bias2.sqrt() })
        })
        .collect()
}

/// Rate functionals along explicit-Euler gradient-flow paths on the reference
/// ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMeasurements {
    /// `(dt, rate_I)` for each step size.
    pub values: Vec<(f64, f64)>,
    /// Largest `|rate_J − rate_I| / rate_I`.
    pub contraction: f64,
}

pub fn rate_on_flow(n: usize, dts: &[f64], horizon: f64, seed: u64) -> Result<RateMeasurements> {
    let c = ellipse();
    let start = jittered(n, c.length(), 0.35, seed)?;
    let mut values = Vec::new();
    let mut contraction: f64 = 0.0;
    for &dt in dts {
        let steps = (horizon / dt).round() as usize;
        let path = ParamPath::new(dt, euler_path(&c, &start, dt, steps)?)?;
        let i = rate_i(&c, &path)?;
        let j = rate_j(&c, &path.map(|x| x.iter().map(|&s| c.point(s)).collect()))?;
        contraction = contraction.max((j - i).abs() / i.abs().max(f64::MIN_POSITIVE));
        values.push((dt, i));
    }
    Ok(RateMeasurements { values, contraction })
}

/// Largest `|hydro_residual|` of the uniform measure on the unit circle over
/// the given polynomial test functions.
pub fn hydro_uniform_max(points: usize, functions: &[String], beta: f64) -> Result<f64> {
    let c = unit_circle();
    let mu = DiscreteMeasure::equidistant(&c, points)?;
    functions.iter().try_fold(0.0_f64, |acc, expr| {
        let f = CurveTestFunction::parse(expr)?;
        Ok(acc.max(hydro_residual(&c, &f, &mu, beta).abs()))
    })
}

/// Variance of the particle generator residual for each `N`.
pub fn generator_variances(ns: &[usize], expr: &str, replicas: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let c = unit_circle();
    let f = CurveTestFunction::parse(expr)?;
    ns.iter()
        .map(|&n| {
            let check = particle_generator_check(&c, &f, 2.0, n, replicas, 0.5, 16, sub_seed(seed, n as u64))?;
            Ok((n, check.variance))
        })
        .collect()
}

/// Runs each configuration twice into fresh directories and counts artifacts
/// whose bytes differ.
pub fn reproducibility_mismatches(configs: &[ExperimentConfig]) -> Result<usize> {
    let mut mismatches = 0;
    for cfg in configs {
        let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
        let outputs = dirs
            .iter()
            .map(|d| {
                let mut c = cfg.clone();
                c.output_dir = d.path().to_path_buf();
                experiment::run(&c)
            })
            .collect::<Result<Vec<_>>>()?;
        let (a, b) = (&outputs[0].artifacts, &outputs[1].artifacts);
        if a.len() != b.len() {
            mismatches += a.len().max(b.len());
            continue;
        }
        for (pa, pb) in a.iter().zip(b) {
            if pa.file_name() != pb.file_name() || std::fs::read(pa)? != std::fs::read(pb)? {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}

/// Small simulate, sample and fekete runs used by the reproducibility check.
pub fn reproducibility_configs(seed: u64) -> Vec<ExperimentConfig> {
    let text = [
        r#"{"command":"simulate","params":{"n":8,"beta":2.0,"dt":1e-3,"t_end":0.5,"n_frames":50}}"#,
        r#"{"command":"simulate","curve":{"kind":"ellipse","a":2,"b":1},"format":"json",
            "params":{"n":5,"kappa":1.0,"mode":"kappa_form","dt":1e-3,"t_end":0.2,"initial":"clustered"}}"#,
        r#"{"command":"sample","params":{"n":4,"beta":2.0,"n_samples":200,"burn_in":100,"chains":2}}"#,
        r#"{"command":"fekete","curve":{"kind":"ellipse","a":2,"b":1},"params":{"n":6}}"#,
    ];
    text.iter()
        .map(|t| {
            let mut c = ExperimentConfig::from_json(t).expect("built-in config parses");
            c.seed = seed;
            c
        })
        .collect()
}

fn record(checks: &mut Vec<Check>, names: &[(&str, f64)], outcome: Result<Vec<f64>>) {
    match outcome {
        Ok(stats) => checks.extend(names.iter().zip(stats).map(|(&(name, thr), s)| Check::at_most(name, s, thr))),
        Err(e) => checks.extend(names.iter().map(|&(name, thr)| Check::failed(name, thr, &e))),
    }
}

/// Two-sample KS critical value at level `0.001` for sample sizes `n`, `m`.
pub fn ks_critical(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.95 * ((n + m) / (n * m)).sqrt()
}

/// Runs every check at reduced scale. Never fails: errors become failed entries.
pub fn diagnose(opts: &DiagnosticsOptions) -> DiagnosticsReport {
    let seed = opts.seed;
    let mut checks = Vec::new();

    record(&mut checks, &[("circle_drift_closed_form", 1e-12)], circle_drift_error(200, 8, 2.0, seed).map(|e| vec![e]));

    record(
        &mut checks,
        &[("fekete_circle_discriminant", 1e-6), ("fekete_circle_gaps", 1e-8)],
        fekete_circle_errors(&[3, 4, 8], sub_seed(seed, 2)).map(|e| vec![e.discriminant, e.gaps]),
    );

    record(
        &mut checks,
        &[("circle_capacity_sequence", 1e-6), ("circle_capacity_decreasing", 0.0)],
        circle_capacity_errors(&[2, 3, 4, 6, 8]).map(|(e, rise)| vec![e, rise]),
    );
    record(
        &mut checks,
        &[("ellipse_capacity_extrapolated", 0.05)],
        ellipse_capacity_errors(&[12, 24, 36]).map(|(e, _)| vec![e]),
    );

    let sign = if opts.corrupt_drift { DriftSign::Flipped } else { DriftSign::Correct };
    for n in [2, 3] {
        let name = format!("stationarity_residual_n{n}");
        match stationarity_scores(n, 2.0, 20_000, sub_seed(seed, 3 + n as u64), sign) {
            Ok(z) => checks.push(Check::at_most(name, z.iter().copied().fold(0.0, f64::max), 3.0)),
            Err(e) => checks.push(Check::failed(name, 3.0, &e)),
        }
    }

    let relax = RelaxationSettings {
        n: 4,
        beta: 2.0,
        trajectories: 300,
        dt: 2e-3,
        times: vec![0.02, 5.0],
        mcmc_samples: 1000,
    };
    match gap_relaxation(&relax, sub_seed(seed, 6)) {
        Ok(r) => {
            let crit = ks_critical(relax.trajectories, r.mcmc_gaps / relax.n);
            checks.push(Check::at_most("sde_gap_law_vs_mcmc", r.ks[1].1, crit));
            checks.push(Check::at_most("sde_gap_law_approaches", r.ks[1].1 - r.ks[0].1, 0.0));
        }
        Err(e) => {
            checks.push(Check::failed("sde_gap_law_vs_mcmc", 0.0, &e));
            checks.push(Check::failed("sde_gap_law_approaches", 0.0, &e));
        }
    }

    let c = ellipse();
    let kolmogorov = Configuration::new([0.05, 0.3, 0.5, 0.8].map(|f| f * c.length()).to_vec(), c.length())
        .and_then(|x| kolmogorov_levels(&c, &x, 2.0, 1.6e-2, 3, 20_000, 8, sub_seed(seed, 7)));
    record(
        &mut checks,
        &[("kolmogorov_drift", 3.0), ("kolmogorov_variance", 3.0), ("kolmogorov_bias_decreasing", 0.0)],
        kolmogorov.map(|levels| {
            let rise = levels.windows(2).map(|w| w[1].drift_bias - w[0].drift_bias).fold(f64::NEG_INFINITY, f64::max);
            vec![
                levels.iter().map(|l| l.drift_z).fold(0.0, f64::max),
                levels.iter().map(|l| l.variance_z).fold(0.0, f64::max),
                rise,
            ]
        }),
    );

    record(
        &mut checks,
        &[("rate_on_gradient_flow", 1e-4), ("rate_halving_ratio", 0.55), ("rate_contraction", 1e-6)],
        rate_on_flow(4, &[1e-3, 5e-4], 1.0, sub_seed(seed, 8)).map(|m| {
            vec![m.values[0].1, m.values[1].1 / m.values[0].1, m.contraction]
        }),
    );

    record(
        &mut checks,
        &[("hydro_uniform_circle", 1e-6)],
        hydro_uniform_max(1 << 10, &experiment::default_functions(), 2.0).map(|v| vec![v]),
    );
    record(
        &mut checks,
        &[("hydro_generator_variance_decreasing", 1.0)],
        generator_variances(&[16, 32, 64], "x^2 - y^2 + x*y", 200, sub_seed(seed, 9)).map(|v| {
            vec![v.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max)]
        }),
    );

    record(
        &mut checks,
        &[("reproducibility", 0.0)],
        reproducibility_mismatches(&reproducibility_configs(seed)).map(|m| vec![m as f64]),
    );

    let passed = checks.iter().all(|c| c.passed);
    DiagnosticsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        corrupt_drift: opts.corrupt_drift,
        checks,
        passed,
    }
}
