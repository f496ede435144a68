//! Euler–Maruyama integration of the parametrization process.
//!
//! Two equivalent forms are supported:
//!
//! * β-form: `dX = dB + b_{β,N}(X) dt` with `b = −(β/2)∇V`,
//! * κ-form: `dX = √κ dB − ∇V(X) dt`, the same process run on the clock `βt/2`.
//!
//! The state lives in the cylinder `E`; every accepted step is mapped back by
//! [`quotient_map`]. A proposal that leaves the chamber `D` is rejected and the
//! step is split into two half-steps with fresh noise, recursively, up to
//! `max_halvings` times.
//!
//! Gaussian increments are a pure function of `(seed, step, draw, particle)`:
//! ChaCha8 is keyed by the seed, the step index selects the stream and the draw
//! counter (one per attempted sub-step) selects the word offset.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{forces_from_cache, in_chamber, Configuration, InverseTemperature, PointCache, MIN_CHORD};
use crate::curve::{ArcLengthCurve, CurveSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    BetaForm,
    KappaForm,
}

/// What to do when a proposal leaves the chamber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum StepPolicy {
    /// Retry with `dt/2` (two half-steps), redrawing the noise.
    RejectHalve { max_halvings: u32 },
    /// Drift `a` replaced by `a / (1 + dt·|a|)`, then reject-and-halve as above.
    Tamed { max_halvings: u32 },
}

impl StepPolicy {
    fn max_halvings(&self) -> u32 {
        match *self {
            StepPolicy::RejectHalve { max_halvings } | StepPolicy::Tamed { max_halvings } => max_halvings,
        }
    }
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::RejectHalve { max_halvings: 20 }
    }
}

pub const DEFAULT_FRAMES: usize = 1000;

#[derive(Debug, Clone)]
pub struct SimulationConfig<'a> {
    pub curve: &'a ArcLengthCurve,
    pub temperature: InverseTemperature,
    pub mode: Mode,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub initial: Configuration,
    pub step_policy: StepPolicy,
    /// Number of recorded frames (besides the initial state).
    pub n_frames: usize,
    /// Also store `γ(X_i)` for every recorded frame.
    pub record_curve_points: bool,
}

impl<'a> SimulationConfig<'a> {
    pub fn new(
        curve: &'a ArcLengthCurve,
        temperature: InverseTemperature,
        mode: Mode,
        dt: f64,
        t_end: f64,
        seed: u64,
        initial: Configuration,
    ) -> Self {
        Self {
            curve,
            temperature,
            mode,
            dt,
            t_end,
            seed,
            initial,
            step_policy: StepPolicy::default(),
            n_frames: DEFAULT_FRAMES,
            record_curve_points: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.dt > self.t_end {
            return Err(Error::InvalidParameter(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end)));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidParameter("n_frames must be at least 1".into()));
        }
        let l = self.curve.length();
        if ((self.initial.period() - l) / l).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "initial configuration period {} does not match curve length {l}",
                self.initial.period()
            )));
        }
        let beta = self.temperature.beta();
        match self.mode {
            Mode::BetaForm if !(beta >= 1.0 && beta.is_finite()) => Err(Error::InvalidTemperature(format!(
                "β = {beta} is outside the existence regime β ≥ 1 of the parametrization process"
            ))),
            Mode::KappaForm if self.temperature.kappa() > 2.0 => Err(Error::InvalidTemperature(format!(
                "κ = {} corresponds to β < 1, outside the existence regime β ≥ 1",
                self.temperature.kappa()
            ))),
            _ => Ok(()),
        }
    }

    /// `(drift coefficient, noise coefficient)` multiplying `F = −∇V` and `√dt·ξ`.
    fn coefficients(&self) -> (f64, f64) {
        match self.mode {
            Mode::BetaForm => (0.5 * self.temperature.beta(), 1.0),
            Mode::KappaForm => (1.0, self.temperature.kappa().sqrt()),
        }
    }

    pub fn meta(&self) -> SimulationMeta {
        SimulationMeta {
            curve: self.curve.spec().clone(),
            curve_length: self.curve.length(),
            beta: self.temperature.beta(),
            kappa: self.temperature.kappa(),
            mode: self.mode,
            dt: self.dt,
            t_end: self.t_end,
            seed: self.seed,
            initial: self.initial.positions().to_vec(),
            step_policy: self.step_policy,
            n_frames: self.n_frames,
        }
    }
}

/// Serializable replay information for a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub curve: CurveSpec,
    pub curve_length: f64,
    pub beta: f64,
    pub kappa: f64,
    pub mode: Mode,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub initial: Vec<f64>,
    pub step_policy: StepPolicy,
    pub n_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
    pub curve_points: Option<Vec<Vec<Complex64>>>,
    pub meta: SimulationMeta,
}

/// Counter-based Gaussian noise keyed by `(seed, step, draw)`.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Fills `out` with i.i.d. standard normals; entry `i` belongs to particle `i`.
    pub fn fill(&mut self, step: u64, draw: u32, out: &mut [f64]) {
        self.rng.set_stream(step);
        self.rng.set_word_pos(u128::from(draw) << 32);
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }
}

/// Position of the counter-based generator: the next step index to draw.
#[derive(Debug, Clone)]
pub struct StepRng {
    pub noise: NoiseSource,
    pub step: u64,
}

impl StepRng {
    pub fn new(seed: u64) -> Self {
        Self { noise: NoiseSource::new(seed), step: 0 }
    }
}

/// Maps a chamber point to the cylinder: `f(x) = x − k·l·ê` with `x₁ − k·l ∈ [0, l)`.
pub fn quotient_map(x: &[f64], l: f64) -> Result<Configuration> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {l}")));
    }
    if !in_chamber(x, l) {
        return Err(Error::DomainViolation(format!("{x:?} is not strictly ordered in D")));
    }
    let mut y = x.to_vec();
    quotient_in_place(&mut y, l);
    if !in_chamber(&y, l) {
        return Err(Error::DomainViolation("ordering lost to rounding in quotient map".into()));
    }
    Ok(Configuration::from_parts_unchecked(y, l))
}

fn quotient_in_place(y: &mut [f64], l: f64) {
    let first = y[0];
    let mut r = first.rem_euclid(l);
    if r >= l {
        r = 0.0;
    }
    let shift = first - r;
    if shift != 0.0 {
        y[0] = r;
        y[1..].iter_mut().for_each(|v| *v -= shift);
    }
}

/// `(γ(x₁), …, γ(x_N))`.
pub fn transplant(curve: &ArcLengthCurve, config: &Configuration) -> Vec<Complex64> {
    config.positions().iter().map(|&x| curve.point(x)).collect()
}

/// Reusable buffers for stepping one trajectory.
#[derive(Debug, Clone, Default)]
struct Workspace {
    cache: PointCache,
    force: Vec<f64>,
    noise: Vec<f64>,
    proposal: Vec<f64>,
}

struct Stepper<'c, 'a> {
    cfg: &'c SimulationConfig<'a>,
    drift_coef: f64,
    noise_coef: f64,
    tamed: bool,
    max_halvings: u32,
    period: f64,
}

impl<'c, 'a> Stepper<'c, 'a> {
    fn new(cfg: &'c SimulationConfig<'a>) -> Self {
        let (drift_coef, noise_coef) = cfg.coefficients();
        Self {
            cfg,
            drift_coef,
            noise_coef,
            tamed: matches!(cfg.step_policy, StepPolicy::Tamed { .. }),
            max_halvings: cfg.step_policy.max_halvings(),
            period: cfg.curve.length(),
        }
    }

    /// Advances `x` (in `D`) by `dt`, splitting on rejection.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        x: &mut Vec<f64>,
        dt: f64,
        depth: u32,
        time: f64,
        noise: &mut NoiseSource,
        step: u64,
        draw: &mut u32,
        ws: &mut Workspace,
    ) -> Result<()> {
        let n = x.len();
        ws.cache.fill(self.cfg.curve, x);
        ws.force.resize(n, 0.0);
        forces_from_cache(self.cfg.curve, &ws.cache, &mut ws.force)?;

        let mut drift_scale = self.drift_coef * dt;
        if self.tamed {
            let norm = ws.force.iter().map(|f| f * f).sum::<f64>().sqrt() * self.drift_coef;
            drift_scale /= 1.0 + dt * norm;
        }

        ws.noise.resize(n, 0.0);
        if self.noise_coef != 0.0 {
            noise.fill(step, *draw, &mut ws.noise);
        } else {
            ws.noise.iter_mut().for_each(|v| *v = 0.0);
        }
        *draw += 1;
        let noise_scale = self.noise_coef * dt.sqrt();

        ws.proposal.clear();
        ws.proposal
            .extend((0..n).map(|i| x[i] + drift_scale * ws.force[i] + noise_scale * ws.noise[i]));

        if self.admissible(&ws.proposal) {
            std::mem::swap(x, &mut ws.proposal);
            return Ok(());
        }
        if depth >= self.max_halvings {
            let gap = crate::coulomb::cyclic_gaps(&ws.proposal, self.period)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            return Err(Error::StepFailure { time, gap, halvings: depth });
        }
        let half = 0.5 * dt;
        self.advance(x, half, depth + 1, time, noise, step, draw, ws)?;
        self.advance(x, half, depth + 1, time + half, noise, step, draw, ws)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        if !in_chamber(x, self.period) {
            return false;
        }
        if x.len() < 2 {
            return true;
        }
        // distinct curve points; arc gaps this small would give chord underflow
        crate::coulomb::cyclic_gaps(x, self.period).into_iter().all(|g| g > MIN_CHORD)
    }
}

/// One Euler–Maruyama step of size `cfg.dt` from `state`, consuming the step
/// index held by `rng`.
pub fn step(state: &Configuration, cfg: &SimulationConfig<'_>, rng: &mut StepRng) -> Result<Configuration> {
    cfg.validate()?;
    let stepper = Stepper::new(cfg);
    let mut x = state.positions().to_vec();
    let mut ws = Workspace::default();
    let mut draw = 0;
    let time = rng.step as f64 * cfg.dt;
    stepper.advance(&mut x, cfg.dt, 0, time, &mut rng.noise, rng.step, &mut draw, &mut ws)?;
    rng.step += 1;
    quotient_in_place(&mut x, stepper.period);
    Ok(Configuration::from_parts_unchecked(x, stepper.period))
}

/// A single trajectory advanced step by step.
pub struct Simulator<'c, 'a> {
    stepper: Stepper<'c, 'a>,
    state: Vec<f64>,
    noise: NoiseSource,
    step: u64,
    time: f64,
    ws: Workspace,
}

impl<'c, 'a> Simulator<'c, 'a> {
    pub fn new(cfg: &'c SimulationConfig<'a>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            stepper: Stepper::new(cfg),
            state: cfg.initial.positions().to_vec(),
            noise: NoiseSource::new(cfg.seed),
            step: 0,
            time: 0.0,
            ws: Workspace::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn state(&self) -> Configuration {
        Configuration::from_parts_unchecked(self.state.clone(), self.stepper.period)
    }

    pub fn positions(&self) -> &[f64] {
        &self.state
    }

    /// Advances by `dt` (a possibly shortened final step).
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let mut draw = 0;
        self.stepper.advance(
            &mut self.state,
            dt,
            0,
            self.time,
            &mut self.noise,
            self.step,
            &mut draw,
            &mut self.ws,
        )?;
        quotient_in_place(&mut self.state, self.stepper.period);
        self.step += 1;
        self.time = self.step as f64 * self.stepper.cfg.dt;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.stepper.cfg.dt)
    }

    /// Steps until `time ≥ t − dt/2`, i.e. to the grid point nearest `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let dt = self.stepper.cfg.dt;
        while self.time < t - 0.5 * dt {
            self.step()?;
        }
        Ok(())
    }
}

/// Number of steps `⌈t_end/dt⌉`, ignoring rounding noise in the ratio.
pub fn step_count(dt: f64, t_end: f64) -> u64 {
    let ratio = t_end / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as u64
    } else {
        ratio.ceil() as u64
    }
}

/// Integrates the trajectory to `t_end`, recording every `⌈steps/n_frames⌉`
/// steps and the final state.
pub fn simulate(cfg: &SimulationConfig<'_>) -> Result<TrajectoryRecord> {
    let mut sim = Simulator::new(cfg)?;
    let n_steps = step_count(cfg.dt, cfg.t_end).max(1);
    let cadence = n_steps.div_ceil(cfg.n_frames as u64).max(1);
    let period = cfg.curve.length();

    let mut times = vec![0.0];
    let mut states = vec![cfg.initial.clone()];
    for k in 1..=n_steps {
        let dt = if k == n_steps { cfg.t_end - (n_steps - 1) as f64 * cfg.dt } else { cfg.dt };
        sim.step_by(dt)?;
        if k % cadence == 0 || k == n_steps {
            let t = if k == n_steps { cfg.t_end } else { k as f64 * cfg.dt };
            times.push(t);
            states.push(Configuration::from_parts_unchecked(sim.state.clone(), period));
        }
    }
    let curve_points = cfg
        .record_curve_points
        .then(|| states.iter().map(|s| transplant(cfg.curve, s)).collect());
    Ok(TrajectoryRecord { times, states, curve_points, meta: cfg.meta() })
}

/// Independent trajectories, one per seed, run on the rayon pool. Results come
/// back in seed order.
pub fn simulate_ensemble(cfg: &SimulationConfig<'_>, seeds: &[u64]) -> Vec<Result<TrajectoryRecord>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            simulate(&c)
        })
        .collect()
}

/// Final states only, one per seed; avoids storing whole trajectories.
pub fn final_states(cfg: &SimulationConfig<'_>, seeds: &[u64], times: &[f64]) -> Result<Vec<Vec<Configuration>>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            let mut sim = Simulator::new(&c)?;
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                sim.advance_to(t)?;
                out.push(sim.state());
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coulomb::drift;
    use crate::curve::unit_circle;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn cfg<'a>(curve: &'a ArcLengthCurve, beta: f64, x: Vec<f64>, dt: f64, t_end: f64) -> SimulationConfig<'a> {
        SimulationConfig::new(
            curve,
            InverseTemperature::from_beta(beta).unwrap(),
            Mode::BetaForm,
            dt,
            t_end,
            7,
            Configuration::new(x, curve.length()).unwrap(),
        )
    }

    #[test]
    fn quotient_examples() {
        let l = TAU;
        let y = [0.5, 1.0, 4.0];
        assert_eq!(quotient_map(&y, l).unwrap().positions(), &y);
        // dyadic period so shifts are exact
        let l = 8.0;
        let y = [0.5, 1.25, 6.0];
        let shifted: Vec<f64> = y.iter().map(|v| v + l).collect();
        assert_eq!(quotient_map(&shifted, l).unwrap().positions(), &y);
        let shifted: Vec<f64> = y.iter().map(|v| v + 7.0 * l).collect();
        assert_eq!(quotient_map(&shifted, l).unwrap().positions(), &y);
        let neg: Vec<f64> = y.iter().map(|v| v - 3.0 * l).collect();
        assert_eq!(quotient_map(&neg, l).unwrap().positions(), &y);
        assert!(matches!(quotient_map(&[1.0, 0.5], l), Err(Error::DomainViolation(_))));
        assert!(matches!(quotient_map(&[0.0, 8.5], l), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn quotient_generic_values_shift_by_multiple_of_period() {
        let l = TAU;
        let y = [0.3, 2.0, 5.9];
        let x: Vec<f64> = y.iter().map(|v| v + 7.0 * l).collect();
        let q = quotient_map(&x, l).unwrap();
        for (a, b) in q.positions().iter().zip(y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn transplant_examples() {
        let c = unit_circle();
        let z = transplant(&c, &Configuration::new(vec![0.0, FRAC_PI_2, PI], TAU).unwrap());
        let expected = [Complex64::new(1.0, 0.0), Complex64::i(), Complex64::new(-1.0, 0.0)];
        for (a, b) in z.iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
        let z = transplant(&c, &Configuration::equidistant(4, TAU, 0.0).unwrap());
        for w in z {
            assert!((w.powi(4) - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_low_beta() {
        let c = unit_circle();
        let config = cfg(&c, 0.5, vec![0.0, 1.0], 0.01, 1.0);
        assert!(matches!(simulate(&config), Err(Error::InvalidTemperature(_))));
        let mut k = config.clone();
        k.mode = Mode::KappaForm;
        k.temperature = InverseTemperature::from_kappa(3.0).unwrap();
        assert!(matches!(simulate(&k), Err(Error::InvalidTemperature(_))));
        let mut bad = cfg(&c, 2.0, vec![0.0, 1.0], 2.0, 1.0);
        assert!(simulate(&bad).is_err());
        bad.dt = -1.0;
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn single_particle_is_brownian() {
        let c = unit_circle();
        let config = cfg(&c, 2.0, vec![1.0], 0.01, 0.01);
        let mut rng = StepRng::new(config.seed);
        let next = step(&config.initial, &config, &mut rng).unwrap();
        let mut noise = NoiseSource::new(config.seed);
        let mut xi = [0.0];
        noise.fill(0, 0, &mut xi);
        let expected = (1.0 + 0.1 * xi[0]).rem_euclid(TAU);
        assert!((next.positions()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_step_follows_drift() {
        let c = unit_circle();
        let mut config = cfg(&c, 2.0, vec![0.0, FRAC_PI_2], 1e-3, 1.0);
        config.mode = Mode::KappaForm;
        config.temperature = InverseTemperature::from_kappa(0.0).unwrap();
        let mut rng = StepRng::new(1);
        let next = step(&config.initial, &config, &mut rng).unwrap();
        // κ-form drift is −∇V = b_{2,N}
        let b = drift(&c, &[0.0, FRAC_PI_2], 2.0).unwrap();
        let x0 = (0.0 + b[0] * 1e-3).rem_euclid(TAU);
        assert!((next.positions()[0] - x0).abs() < 1e-15);
        assert_eq!(rng.step, 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = unit_circle();
        let config = cfg(&c, 2.0, vec![0.0, 1.0, 2.5, 4.0], 1e-3, 0.5);
        let a = simulate(&config).unwrap();
        let b = simulate(&config).unwrap();
        assert_eq!(a, b);
        let mut other = config.clone();
        other.seed = 8;
        assert_ne!(simulate(&other).unwrap().states, a.states);
    }

    #[test]
    fn recording_cadence() {
        let c = unit_circle();
        let mut config = cfg(&c, 2.0, vec![0.0, 3.0], 0.01, 1.0);
        config.n_frames = 10;
        let rec = simulate(&config).unwrap();
        assert_eq!(rec.times.len(), 11);
        assert!((rec.times[10] - 1.0).abs() < 1e-15);
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
        config.t_end = 1.005;
        let rec = simulate(&config).unwrap();
        assert_eq!(*rec.times.last().unwrap(), 1.005);
    }

    #[test]
    fn step_failure_reports_gap() {
        let c = unit_circle();
        // huge dt with no halvings allowed must fail
        let mut config = cfg(&c, 2.0, vec![0.0, 1e-3, 2e-3], 1.0, 1.0);
        config.step_policy = StepPolicy::RejectHalve { max_halvings: 0 };
        match simulate(&config) {
            Err(Error::StepFailure { halvings, .. }) => assert_eq!(halvings, 0),
            other => panic!("expected StepFailure, got {other:?}"),
        }
        config.step_policy = StepPolicy::RejectHalve { max_halvings: 30 };
        let rec = simulate(&config).unwrap();
        assert!(rec.states.iter().all(|s| in_chamber(s.positions(), TAU)));
    }

    #[test]
    fn tamed_policy_runs() {
        let c = unit_circle();
        let mut config = cfg(&c, 2.0, vec![0.0, 0.01, 3.0], 0.05, 2.0);
        config.step_policy = StepPolicy::Tamed { max_halvings: 20 };
        let rec = simulate(&config).unwrap();
        assert!(rec.states.iter().all(|s| s.min_gap() > 0.0));
    }
}
