//! Zero-noise gradient flow `u̇ = −∇V(u)`, Fekete points and transfinite diameter.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{energy_of_points, forces_from_cache, in_chamber, Configuration, PointCache};
use crate::curve::ArcLengthCurve;
use crate::error::{Error, Result};
use crate::sde::quotient_map;

/// Step sizes shrink at most this many times below the requested `dt`.
const MAX_BACKTRACKS: u32 = 60;
const REGROWTH: f64 = 1.25;
/// Armijo fraction: a step must realize half of the first-order decrease.
const SUFFICIENT_DECREASE: f64 = 0.5;

/// Outcome of [`gradient_flow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeketeResult {
    pub points: Configuration,
    pub curve_points: Vec<Complex64>,
    pub energy: f64,
    pub log_discriminant: f64,
    /// `exp(log_discriminant)`; `+∞` once it overflows.
    pub discriminant: f64,
    /// Euclidean norm of `∇V` at the returned iterate.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FeketeResult {
    /// Turns an unconverged run into [`Error::NonConvergence`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { grad_norm: self.grad_norm, iterations: self.iterations })
        }
    }

    /// `Δ_N^{1/(N(N−1))}`.
    pub fn diameter_estimate(&self) -> f64 {
        let n = self.points.len() as f64;
        (self.log_discriminant / (n * (n - 1.0))).exp()
    }
}

struct Evaluation {
    energy: f64,
    slack: f64,
    grad: Vec<f64>,
    points: Vec<Complex64>,
}

fn evaluate(curve: &ArcLengthCurve, x: &[f64]) -> Result<Evaluation> {
    let cache = PointCache::new(curve, x);
    let energy = energy_of_points(&cache.points)?;
    let mut grad = vec![0.0; x.len()];
    forces_from_cache(curve, &cache, &mut grad)?;
    grad.iter_mut().for_each(|g| *g = -*g);
    // rounding floor of the pair sum: below it a decrease of V is not observable
    let abs_sum: f64 = cache
        .points
        .iter()
        .enumerate()
        .flat_map(|(i, a)| cache.points[i + 1..].iter().map(move |b| (a - b).norm().ln().abs()))
        .sum();
    let slack = 16.0 * f64::EPSILON * (abs_sum + 1.0);
    Ok(Evaluation { energy, slack, grad, points: cache.points })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Explicit Euler on `u̇ = −∇V(u)` with backtracking.
///
/// A trial step is accepted when it stays in the chamber and lowers `V` by at
/// least half the first-order prediction `h‖∇V‖²`, up to floating-point rounding
/// of the pair sum; otherwise the step halves.
/// After each accepted step the step size grows back towards `dt`. Stops once
/// `‖∇V‖₂ ≤ tol`, or after `max_iter` accepted steps with `converged = false`.
pub fn gradient_flow(
    curve: &ArcLengthCurve,
    initial: &Configuration,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FeketeResult> {
    gradient_flow_observed(curve, initial, dt, tol, max_iter, |_, _| {})
}

/// [`gradient_flow`] calling `observe(iterate, V)` for the start and every accepted step.
pub fn gradient_flow_observed<F: FnMut(&[f64], f64)>(
    curve: &ArcLengthCurve,
    initial: &Configuration,
    dt: f64,
    tol: f64,
    max_iter: usize,
    mut observe: F,
) -> Result<FeketeResult> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if initial.len() < 2 {
        return Err(Error::InvalidParameter("gradient flow needs at least two particles".into()));
    }
    let l = curve.length();
    if (initial.period() - l).abs() > 1e-9 * l {
        return Err(Error::InvalidParameter(format!(
            "configuration period {} does not match curve length {l}",
            initial.period()
        )));
    }
    let mut x = initial.positions().to_vec();
    let mut cur = evaluate(curve, &x)?;
    if !cur.energy.is_finite() {
        return Err(Error::DegenerateConfiguration("initial configuration has a collapsed chord".into()));
    }
    observe(&x, cur.energy);
    let mut h = dt;
    let mut iterations = 0;
    let mut trial = vec![0.0; x.len()];
    let converged = loop {
        if norm(&cur.grad) <= tol {
            break true;
        }
        if iterations >= max_iter {
            break false;
        }
        let mut backtracks = 0;
        let g2: f64 = cur.grad.iter().map(|g| g * g).sum();
        let next = loop {
            trial.iter_mut().zip(&x).zip(&cur.grad).for_each(|((t, xi), g)| *t = xi - h * g);
            if in_chamber(&trial, l) {
                if let Ok(e) = evaluate(curve, &trial) {
                    if e.energy.is_finite() && e.energy <= cur.energy - SUFFICIENT_DECREASE * h * g2 + cur.slack {
                        break e;
                    }
                }
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                return Err(Error::StepTooLarge { dt: h });
            }
            h *= 0.5;
        };
        std::mem::swap(&mut x, &mut trial);
        cur = next;
        iterations += 1;
        observe(&x, cur.energy);
        if backtracks == 0 {
            h = (h * REGROWTH).min(dt);
        }
    };
    let grad_norm = norm(&cur.grad);
    let log_discriminant = -2.0 * cur.energy;
    Ok(FeketeResult {
        points: quotient_map(&x, l)?,
        curve_points: cur.points,
        energy: cur.energy,
        log_discriminant,
        discriminant: log_discriminant.exp(),
        grad_norm,
        iterations,
        converged,
    })
}

/// Fixed-step explicit Euler iterates `u_{k+1} = u_k − dt·∇V(u_k)`, `steps + 1` states
/// including the start. Fails if an iterate leaves the chamber.
pub fn euler_path(curve: &ArcLengthCurve, initial: &Configuration, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let l = curve.length();
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = initial.positions().to_vec();
    let mut cache = PointCache::new(curve, &x);
    let mut f = vec![0.0; x.len()];
    path.push(x.clone());
    for _ in 0..steps {
        forces_from_cache(curve, &cache, &mut f)?;
        x.iter_mut().zip(&f).for_each(|(xi, fi)| *xi += dt * fi);
        if !in_chamber(&x, l) {
            return Err(Error::StepTooLarge { dt });
        }
        cache.fill(curve, &x);
        path.push(x.clone());
    }
    Ok(path)
}

/// One row of a transfinite-diameter table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub n: usize,
    /// `Δ_N^{1/(N(N−1))}`.
    pub estimate: f64,
    pub log_discriminant: f64,
    pub iterations: usize,
}

/// Raw estimates together with the least-squares fit `estimate ≈ c + a/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable {
    pub rows: Vec<CapacityRow>,
    /// The intercept `c`, present with at least two rows.
    pub extrapolated: Option<f64>,
    pub slope: Option<f64>,
}

impl CapacityTable {
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.n, r.estimate)).collect()
    }
}

/// Least-squares fit of `y ≈ c + a/N`; returns `(c, a)`.
pub fn fit_inverse_n(rows: &[(usize, f64)]) -> Option<(f64, f64)> {
    if rows.len() < 2 {
        return None;
    }
    let m = rows.len() as f64;
    let (sx, sy) = rows.iter().fold((0.0, 0.0), |(sx, sy), &(n, y)| (sx + 1.0 / n as f64, sy + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = rows.iter().fold((0.0, 0.0), |(sxx, sxy), &(n, y)| {
        let dx = 1.0 / n as f64 - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    Some((my - a * mx, a))
}

/// Runs [`gradient_flow`] from equally spaced starts for every `N` and reports
/// `Δ_N^{1/(N(N−1))}`.
pub fn transfinite_diameter(curve: &ArcLengthCurve, n_list: &[usize], tol: f64) -> Result<CapacityTable> {
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidParameter(format!("N must be at least 2, got {n}")));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("N list must be strictly increasing".into()));
    }
    let l = curve.length();
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let start = Configuration::equidistant(n, l, 0.0)?;
            let gap = l / n as f64;
            let res = gradient_flow(curve, &start, 0.4 * gap * gap, tol, 2_000_000)?.into_converged()?;
            Ok(CapacityRow {
                n,
                estimate: res.diameter_estimate(),
                log_discriminant: res.log_discriminant,
                iterations: res.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = rows.iter().map(|r| (r.n, r.estimate)).collect();
    let fit = fit_inverse_n(&pairs);
    Ok(CapacityTable { rows, extrapolated: fit.map(|f| f.0), slope: fit.map(|f| f.1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{unit_circle, CurveSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn ellipse() -> ArcLengthCurve {
        ArcLengthCurve::new(CurveSpec::Ellipse { a: 2.0, b: 1.0 }, 1e-12).unwrap()
    }

    fn random_config(rng: &mut ChaCha8Rng, n: usize, l: f64) -> Configuration {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * l).collect();
        x.sort_by(f64::total_cmp);
        Configuration::new(x, l).unwrap()
    }

    #[test]
    fn circle_four_points_equidistant() {
        let c = unit_circle();
        let start = Configuration::new(vec![0.1, 1.2, 3.5, 4.0], TAU).unwrap();
        let r = gradient_flow(&c, &start, 0.1, 1e-11, 100_000).unwrap();
        assert!(r.converged);
        for g in r.points.gaps() {
            assert!((g - FRAC_PI_2).abs() < 1e-8, "{g}");
        }
        assert!((r.discriminant / 256.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_start_takes_no_steps() {
        let c = unit_circle();
        let start = Configuration::equidistant(6, TAU, 0.3).unwrap();
        let r = gradient_flow(&c, &start, 0.1, 1e-10, 10).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn ellipse_pair_reaches_major_axis() {
        let e = ellipse();
        // grid oracle over the parameter angle: the longest chord
        let m = 720;
        let pt = |t: f64| Complex64::new(2.0 * t.cos(), t.sin());
        let mut best = (0.0, 0.0, 0.0);
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (TAU * i as f64 / m as f64, TAU * j as f64 / m as f64);
                let d = (pt(a) - pt(b)).norm();
                if d > best.0 {
                    best = (d, a, b);
                }
            }
        }
        assert!((best.0 - 4.0).abs() < 1e-12);
        let start = Configuration::new(vec![0.4, 4.0], e.length()).unwrap();
        let r = gradient_flow(&e, &start, 0.05, 1e-11, 100_000).unwrap();
        assert!(r.converged);
        let mut xs: Vec<f64> = r.curve_points.iter().map(|z| z.re).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 2.0).abs() < 1e-8 && (xs[1] - 2.0).abs() < 1e-8, "{:?}", r.curve_points);
        assert!(r.curve_points.iter().all(|z| z.im.abs() < 1e-5));
        assert!((r.discriminant - best.0 * best.0).abs() < 1e-9);
    }

    #[test]
    fn energy_never_increases() {
        let c = ellipse();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = random_config(&mut rng, 7, c.length());
        let mut energies = Vec::new();
        let r = gradient_flow_observed(&c, &start, 1.0, 1e-9, 100_000, |_, v| energies.push(v)).unwrap();
        assert!(r.converged);
        assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn fekete_beats_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for curve in [unit_circle(), ellipse()] {
            let l = curve.length();
            for n in 2..=4 {
                let r = gradient_flow(&curve, &Configuration::equidistant(n, l, 0.2).unwrap(), 0.2, 1e-10, 100_000)
                    .unwrap();
                for _ in 0..10_000 {
                    let cfg = random_config(&mut rng, n, l);
                    let pts: Vec<_> = cfg.positions().iter().map(|&s| curve.point(s)).collect();
                    let e = energy_of_points(&pts).unwrap();
                    assert!(-2.0 * e <= r.log_discriminant + 1e-9);
                }
            }
        }
    }

    #[test]
    fn rotation_equivariance_on_circle() {
        let c = unit_circle();
        let base = [0.2, 0.9, 2.5, 3.1, 5.0];
        let phi = 0.7;
        let a = gradient_flow(&c, &Configuration::new(base.to_vec(), TAU).unwrap(), 0.1, 1e-12, 100_000).unwrap();
        let rotated: Vec<f64> = base.iter().map(|x| x + phi).collect();
        let b = gradient_flow(&c, &quotient_map(&rotated, TAU).unwrap(), 0.1, 1e-12, 100_000).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        for za in &a.curve_points {
            let target = za * rot;
            let d = b.curve_points.iter().map(|zb| (zb - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn circle_capacity_sequence() {
        let t = transfinite_diameter(&unit_circle(), &[4, 8, 16], 1e-10).unwrap();
        for r in &t.rows {
            let n = r.n as f64;
            assert!((r.estimate - n.powf(1.0 / (n - 1.0))).abs() < 1e-9);
        }
        assert!((t.rows[2].estimate - 1.2030).abs() < 1e-4);
        assert!(t.rows.windows(2).all(|w| w[1].estimate < w[0].estimate));
    }

    #[test]
    fn fit_recovers_line() {
        let rows: Vec<_> = [4usize, 8, 16].iter().map(|&n| (n, 1.5 + 2.0 / n as f64)).collect();
        let (c, a) = fit_inverse_n(&rows).unwrap();
        assert!((c - 1.5).abs() < 1e-12 && (a - 2.0).abs() < 1e-12);
        assert!(fit_inverse_n(&rows[..1]).is_none());
    }

    #[test]
    fn unconverged_reports_error() {
        let c = unit_circle();
        let start = Configuration::new(vec![0.0, 0.1, 0.2], TAU).unwrap();
        let r = gradient_flow(&c, &start, 1e-4, 1e-12, 3).unwrap();
        assert!(!r.converged && r.iterations == 3);
        assert!(matches!(r.into_converged(), Err(Error::NonConvergence { .. })));
        assert!(transfinite_diameter(&c, &[3, 2], 1e-8).is_err());
    }
}
