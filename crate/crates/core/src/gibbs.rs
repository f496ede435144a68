//! Random-walk Metropolis sampling of the stationary Coulomb gas on `E`.
//!
//! The target is the unnormalized density `∏_{i≠j}|γ(x_i) − γ(x_j)|^{β/2}`.
//! Each update moves one particle by a Gaussian step. Proposals that break the
//! cyclic ordering have zero target density and are rejected; accepted moves of
//! the first particle across the cut are mapped back into `E` by shifting all
//! positions by `±l`.
//!
//! This chain is independent of the SDE integrator and serves as the reference
//! ensemble for the convergence and stationarity checks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{cyclic_gaps, forces_from_cache, in_chamber, Configuration, PointCache};
use crate::curve::ArcLengthCurve;
use crate::error::{Error, Result};
use crate::stats::batch_means;

/// Target acceptance rate for the burn-in adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub seed: u64,
}

/// Retained samples of one or more chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<Configuration>,
    pub beta: f64,
    pub chains: Vec<ChainMeta>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Acceptance rate averaged over chains.
    pub fn acceptance_rate(&self) -> f64 {
        self.chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / self.chains.len().max(1) as f64
    }
}

/// Outcome of one Metropolis update, with the log acceptance ratio that was used.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisMove {
    pub state: Configuration,
    pub accepted: bool,
    /// `log π(x′) − log π(x)`; `−∞` for proposals outside the chamber.
    pub log_ratio: f64,
    /// The proposed point in `D` (before quotienting).
    pub proposal: Vec<f64>,
}

/// A Metropolis chain with cached curve points.
pub struct Chain<'a> {
    curve: &'a ArcLengthCurve,
    beta: f64,
    x: Vec<f64>,
    z: Vec<Complex64>,
    rng: ChaCha8Rng,
    pub scale: f64,
    accepted: u64,
    proposed: u64,
}

impl<'a> Chain<'a> {
    pub fn new(curve: &'a ArcLengthCurve, beta: f64, start: &Configuration, scale: f64, seed: u64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidTemperature(format!("β must be positive and finite, got {beta}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("proposal scale must be positive, got {scale}")));
        }
        let x = start.positions().to_vec();
        let z = x.iter().map(|&s| curve.point(s)).collect();
        Ok(Self { curve, beta, x, z, rng: ChaCha8Rng::seed_from_u64(seed), scale, accepted: 0, proposed: 0 })
    }

    pub fn state(&self) -> Configuration {
        Configuration::from_parts_unchecked(self.x.clone(), self.curve.length())
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// `log π(x′)/π(x)` for moving particle `i` to `zi_new`.
    fn log_ratio(&self, i: usize, zi_new: Complex64) -> f64 {
        let zi = self.z[i];
        let mut acc = 0.0;
        for (j, &zj) in self.z.iter().enumerate() {
            if j != i {
                let new = (zi_new - zj).norm();
                if new == 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += new.ln() - (zi - zj).norm().ln();
            }
        }
        self.beta * acc
    }

    /// Metropolis update of particle `i` with Gaussian increment `scale·ξ`.
    fn update_site(&mut self, i: usize) -> (bool, f64, Vec<f64>) {
        let l = self.curve.length();
        let xi: f64 = self.rng.sample(StandardNormal);
        let mut proposal = self.x.clone();
        proposal[i] += self.scale * xi;
        let u: f64 = self.rng.random();
        self.proposed += 1;

        if !in_chamber(&proposal, l) {
            return (false, f64::NEG_INFINITY, proposal);
        }
        let zi_new = self.curve.point(proposal[i]);
        let log_ratio = self.log_ratio(i, zi_new);
        let accept = log_ratio >= 0.0 || u.ln() < log_ratio;
        if accept {
            self.accepted += 1;
            self.x[i] = proposal[i];
            self.z[i] = zi_new;
            if i == 0 && !(0.0..l).contains(&self.x[0]) {
                let shift = self.x[0] - self.x[0].rem_euclid(l);
                self.x.iter_mut().for_each(|v| *v -= shift);
                if self.x[0] >= l {
                    self.x[0] = 0.0;
                }
            }
        }
        (accept, log_ratio, proposal)
    }

    /// One update of a uniformly chosen particle.
    pub fn step(&mut self) -> MetropolisMove {
        let i = self.rng.random_range(0..self.x.len());
        let (accepted, log_ratio, proposal) = self.update_site(i);
        MetropolisMove { state: self.state(), accepted, log_ratio, proposal }
    }

    /// Systematic sweep over all particles.
    pub fn sweep(&mut self) {
        for i in 0..self.x.len() {
            self.update_site(i);
        }
    }
}

/// One Metropolis step from `state` (uniformly chosen particle).
pub fn mcmc_step(
    curve: &ArcLengthCurve,
    beta: f64,
    state: &Configuration,
    proposal_scale: f64,
    seed: u64,
) -> Result<MetropolisMove> {
    let mut chain = Chain::new(curve, beta, state, proposal_scale, seed)?;
    Ok(chain.step())
}

/// Sampling plan: sweeps of burn-in (with scale adaptation), retained samples
/// and sweeps between retained samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
}

/// Runs a single chain from equidistant points.
pub fn sample_stationary(
    curve: &ArcLengthCurve,
    beta: f64,
    n: usize,
    settings: SamplerSettings,
    seed: u64,
) -> Result<SampleBatch> {
    let (samples, meta) = run_chain(curve, beta, n, settings, seed)?;
    Ok(SampleBatch { samples, beta, chains: vec![meta] })
}

/// Independent chains with seeds `seed, seed + 1, …`, run in parallel and
/// concatenated in chain order. `settings.n_samples` is per chain.
pub fn sample_chains(
    curve: &ArcLengthCurve,
    beta: f64,
    n: usize,
    settings: SamplerSettings,
    seed: u64,
    n_chains: usize,
) -> Result<SampleBatch> {
    let runs: Vec<Result<(Vec<Configuration>, ChainMeta)>> = (0..n_chains.max(1) as u64)
        .into_par_iter()
        .map(|k| run_chain(curve, beta, n, settings, seed.wrapping_add(k)))
        .collect();
    let mut samples = Vec::new();
    let mut chains = Vec::new();
    for run in runs {
        let (s, m) = run?;
        samples.extend(s);
        chains.push(m);
    }
    Ok(SampleBatch { samples, beta, chains })
}

fn run_chain(
    curve: &ArcLengthCurve,
    beta: f64,
    n: usize,
    settings: SamplerSettings,
    seed: u64,
) -> Result<(Vec<Configuration>, ChainMeta)> {
    if n == 0 || settings.n_samples == 0 || settings.thin == 0 {
        return Err(Error::InvalidParameter("need n ≥ 1, n_samples ≥ 1 and thin ≥ 1".into()));
    }
    let l = curve.length();
    let start = Configuration::equidistant(n, l, 0.0)?;
    let mut chain = Chain::new(curve, beta, &start, 0.5 * l / n as f64, seed)?;

    // Robbins–Monro adaptation of log(scale) in blocks of 20 sweeps; frozen afterwards.
    let block = 20;
    let mut blocks = 0usize;
    for s in 1..=settings.burn_in {
        chain.sweep();
        if s % block == 0 {
            blocks += 1;
            let rate = chain.acceptance_rate();
            let gain = 1.0 / (blocks as f64).sqrt();
            chain.scale = (chain.scale * ((rate - TARGET_ACCEPTANCE) * gain).exp()).clamp(1e-9 * l, l);
            chain.reset_counters();
        }
    }
    chain.reset_counters();

    let mut samples = Vec::with_capacity(settings.n_samples);
    for _ in 0..settings.n_samples {
        for _ in 0..settings.thin {
            chain.sweep();
        }
        samples.push(chain.state());
    }
    let meta = ChainMeta {
        burn_in: settings.burn_in,
        thin: settings.thin,
        acceptance_rate: chain.acceptance_rate(),
        proposal_scale: chain.scale,
        seed,
    };
    Ok((samples, meta))
}

/// Uniform samples on `E`: the first position is uniform on `[0, l)` and the
/// others are sorted uniforms on `(x₁, x₁ + l)`. Used as a negative control.
pub fn uniform_batch(l: f64, n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        let x1: f64 = rng.random::<f64>() * l;
        let mut rest: Vec<f64> = (1..n).map(|_| x1 + rng.random::<f64>() * l).collect();
        rest.sort_by(f64::total_cmp);
        let mut x = vec![x1];
        x.extend(rest);
        if let Ok(c) = Configuration::new(x, l) {
            samples.push(c);
        }
    }
    Ok(SampleBatch { samples, beta: 0.0, chains: Vec::new() })
}

/// A smooth function on `E` with gradient and Laplacian, vanishing near `∂E`.
pub trait TestFunction: Sync {
    /// Returns `(φ(x), Δφ(x))` and writes `∇φ(x)` into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> (f64, f64);

    /// Every configuration in the support has all cyclic gaps at least this large.
    fn support_margin(&self) -> f64;
}

/// Product of compactly supported bumps in the first `N − 1` gaps:
/// `φ(x) = ∏_k ψ((g_k − c_k)/w_k)`, `ψ(u) = exp(−1/(1 − u²))` on `|u| < 1`.
///
/// It is invariant under rotation `x ↦ x + c·ê`, hence well defined on the
/// cylinder, and its support keeps every gap (including the closing one) away
/// from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GapBump {
    centers: Vec<f64>,
    widths: Vec<f64>,
    margin: f64,
}

impl GapBump {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>, period: f64) -> Result<Self> {
        if centers.len() != widths.len() || centers.is_empty() {
            return Err(Error::InvalidParameter("one center and width per gap".into()));
        }
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("bump widths must be positive".into()));
        }
        let inner = centers.iter().zip(&widths).map(|(c, w)| c - w).fold(f64::INFINITY, f64::min);
        let closing = period - centers.iter().zip(&widths).map(|(c, w)| c + w).sum::<f64>();
        let margin = inner.min(closing);
        if !(margin > 0.0) {
            return Err(Error::SupportViolation(format!(
                "bump support reaches a collision (smallest guaranteed gap {margin:.3e})"
            )));
        }
        Ok(Self { centers, widths, margin })
    }

    pub fn dims(&self) -> usize {
        self.centers.len() + 1
    }
}

/// `ψ, ψ′, ψ″` of the standard bump at `u`.
fn bump(u: f64) -> (f64, f64, f64) {
    if u.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - u * u;
    let psi = (-1.0 / q).exp();
    let d1 = psi * (-2.0 * u / (q * q));
    let d2 = psi * (4.0 * u * u / q.powi(4) - 2.0 / (q * q) - 8.0 * u * u / q.powi(3));
    (psi, d1, d2)
}

impl TestFunction for GapBump {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> (f64, f64) {
        let m = self.centers.len();
        assert_eq!(x.len(), m + 1, "GapBump dimension mismatch");
        let mut vals = Vec::with_capacity(m);
        for k in 0..m {
            let w = self.widths[k];
            let (p, d1, d2) = bump((x[k + 1] - x[k] - self.centers[k]) / w);
            vals.push((p, d1 / w, d2 / (w * w)));
        }
        let prod_except = |skip: &[usize]| -> f64 {
            (0..m).filter(|k| !skip.contains(k)).map(|k| vals[k].0).product()
        };
        let phi = prod_except(&[]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        if vals.iter().any(|v| v.0 == 0.0) {
            return (0.0, 0.0);
        }
        // dφ/dg_k, then chain rule with g_k = x_{k+1} − x_k
        let dg: Vec<f64> = (0..m).map(|k| vals[k].1 * prod_except(&[k])).collect();
        for k in 0..m {
            grad[k + 1] += dg[k];
            grad[k] -= dg[k];
        }
        // Δφ = Σ_k 2∂²_{g_k}φ − 2Σ_k ∂_{g_k}∂_{g_{k+1}}φ
        let mut lap = 0.0;
        for k in 0..m {
            lap += 2.0 * vals[k].2 * prod_except(&[k]);
            if k + 1 < m {
                lap -= 2.0 * vals[k].1 * vals[k + 1].1 * prod_except(&[k, k + 1]);
            }
        }
        (phi, lap)
    }

    fn support_margin(&self) -> f64 {
        self.margin
    }
}

/// Which drift enters the generator; `Flipped` is a negative-control hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSign {
    Correct,
    Flipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub estimate: f64,
    pub stderr: f64,
}

impl Residual {
    /// `|estimate| ≤ k·stderr`.
    pub fn consistent(&self, k: f64) -> bool {
        self.estimate.abs() <= k * self.stderr
    }
}

/// Monte-Carlo estimate of `∫ Lφ dμ` with `Lφ = ½Δφ + b·∇φ`, using batch-means
/// standard errors.
pub fn stationarity_residual(
    curve: &ArcLengthCurve,
    batch: &SampleBatch,
    beta: f64,
    test_fn: &dyn TestFunction,
    sign: DriftSign,
) -> Result<Residual> {
    let margin = test_fn.support_margin();
    if !(margin > 0.0) {
        return Err(Error::SupportViolation(format!("declared support margin {margin} is not positive")));
    }
    let l = curve.length();
    let s = match sign {
        DriftSign::Correct => 1.0,
        DriftSign::Flipped => -1.0,
    };
    let mut values = Vec::with_capacity(batch.len());
    let mut cache = PointCache::default();
    for sample in &batch.samples {
        let x = sample.positions();
        let mut grad = vec![0.0; x.len()];
        let (phi, lap) = test_fn.eval(x, &mut grad);
        let active = phi != 0.0 || lap != 0.0 || grad.iter().any(|g| *g != 0.0);
        if !active {
            values.push(0.0);
            continue;
        }
        let min_gap = cyclic_gaps(x, l).into_iter().fold(f64::INFINITY, f64::min);
        if min_gap < margin {
            return Err(Error::SupportViolation(format!(
                "test function is nonzero at a configuration with gap {min_gap:.3e} < {margin:.3e}"
            )));
        }
        cache.fill(curve, x);
        let mut force = vec![0.0; x.len()];
        forces_from_cache(curve, &cache, &mut force)?;
        let b_dot_grad: f64 = force.iter().zip(&grad).map(|(f, g)| 0.5 * beta * f * g).sum();
        values.push(0.5 * lap + s * b_dot_grad);
    }
    let (estimate, stderr) = batch_means(&values, 50);
    Ok(Residual { estimate, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::unit_circle;
    use std::f64::consts::TAU;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let f = GapBump::new(vec![1.5, 2.0], vec![0.8, 0.9], TAU).unwrap();
        let x = [0.2, 1.9, 3.7];
        let mut grad = [0.0; 3];
        let (phi, lap) = f.eval(&x, &mut grad);
        assert!(phi > 0.0);
        let h = 1e-5;
        let mut lap_fd = 0.0;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let mut scratch = [0.0; 3];
            let fp = f.eval(&xp, &mut scratch).0;
            let fm = f.eval(&xm, &mut scratch).0;
            assert!(((fp - fm) / (2.0 * h) - grad[j]).abs() < 1e-8, "grad {j}");
            lap_fd += (fp - 2.0 * phi + fm) / (h * h);
        }
        assert!((lap_fd - lap).abs() < 1e-4, "{lap_fd} vs {lap}");
    }

    #[test]
    fn bump_support_checks() {
        assert!(matches!(GapBump::new(vec![0.5], vec![0.6], TAU), Err(Error::SupportViolation(_))));
        assert!(matches!(GapBump::new(vec![3.0, 3.0], vec![0.5, 0.5], TAU), Err(Error::SupportViolation(_))));
        assert!(GapBump::new(vec![2.0], vec![1.0], TAU).is_ok());
    }

    #[test]
    fn rejects_collisions_and_accepts_uphill() {
        let c = unit_circle();
        let start = Configuration::new(vec![0.0, 0.1], TAU).unwrap();
        // huge scale: most proposals leave the chamber or land somewhere; any
        // chamber violation must leave the state unchanged
        let mut chain = Chain::new(&c, 2.0, &start, 50.0, 3).unwrap();
        for _ in 0..200 {
            let before = chain.state();
            let mv = chain.step();
            if !in_chamber(&mv.proposal, TAU) {
                assert!(!mv.accepted);
                assert_eq!(mv.state, before);
                assert_eq!(mv.log_ratio, f64::NEG_INFINITY);
            }
            if mv.log_ratio >= 0.0 {
                assert!(mv.accepted);
            }
        }
    }

    #[test]
    fn detailed_balance_on_logged_ratios() {
        let c = unit_circle();
        let beta = 2.0;
        let start = Configuration::new(vec![0.0, 0.7, 2.0], TAU).unwrap();
        let mut chain = Chain::new(&c, beta, &start, 0.4, 11).unwrap();
        for _ in 0..500 {
            let from = chain.state();
            let mv = chain.step();
            if !mv.log_ratio.is_finite() {
                continue;
            }
            let pi = |x: &[f64]| crate::coulomb::log_density_unnormalized(&c, x, beta).unwrap();
            let (lp_from, lp_to) = (pi(from.positions()), pi(&mv.proposal));
            assert!((lp_to - lp_from - mv.log_ratio).abs() < 1e-10);
            let fwd = lp_from + mv.log_ratio.min(0.0);
            let bwd = lp_to + (-mv.log_ratio).min(0.0);
            assert!((fwd - bwd).abs() < 1e-10);
        }
    }

    #[test]
    fn samples_stay_in_cylinder() {
        let c = unit_circle();
        let settings = SamplerSettings { n_samples: 500, burn_in: 200, thin: 2 };
        let batch = sample_stationary(&c, 2.0, 4, settings, 5).unwrap();
        assert_eq!(batch.len(), 500);
        for s in &batch.samples {
            assert!(Configuration::new(s.positions().to_vec(), TAU).is_ok());
        }
        let rate = batch.acceptance_rate();
        assert!(rate > 0.1 && rate < 0.7, "{rate}");
        let again = sample_stationary(&c, 2.0, 4, settings, 5).unwrap();
        assert_eq!(batch, again);
    }

    struct Flat;
    impl TestFunction for Flat {
        fn eval(&self, _x: &[f64], grad: &mut [f64]) -> (f64, f64) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            (1.0, 0.0)
        }
        fn support_margin(&self) -> f64 {
            1e-300
        }
    }

    #[test]
    fn flat_test_function_gives_exact_zero() {
        let c = unit_circle();
        let batch = uniform_batch(TAU, 2, 100, 1).unwrap();
        let r = stationarity_residual(&c, &batch, 2.0, &Flat, DriftSign::Correct).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    struct Leaky;
    impl TestFunction for Leaky {
        fn eval(&self, x: &[f64], grad: &mut [f64]) -> (f64, f64) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            grad[0] = 1.0;
            (x[1] - x[0], 0.0)
        }
        fn support_margin(&self) -> f64 {
            0.5
        }
    }

    #[test]
    fn support_violation_detected() {
        let c = unit_circle();
        let batch = SampleBatch {
            samples: vec![Configuration::new(vec![0.0, 0.1], TAU).unwrap()],
            beta: 2.0,
            chains: vec![],
        };
        assert!(matches!(
            stationarity_residual(&c, &batch, 2.0, &Leaky, DriftSign::Correct),
            Err(Error::SupportViolation(_))
        ));
    }
}
