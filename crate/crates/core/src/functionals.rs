//! Rate functionals of the small-noise large deviations, tangential derivatives
//! of test functions and the mean-field (hydrodynamic) generator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::{forces_from_cache, in_chamber, Configuration, InverseTemperature, PointCache};
use crate::curve::{ArcLengthCurve, CurveFrame};
use crate::error::{Error, Result};
use crate::polynomial::Polynomial;
use crate::sde::{final_states, Mode, SimulationConfig};
use crate::stats;

/// Curve paths must stay this close to `Γ`.
pub const ON_CURVE_TOL: f64 = 1e-8;

/// States on the uniform time grid `t_k = k·dt`, `k = 0..=M`, `M ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath<S> {
    dt: f64,
    states: Vec<S>,
}

/// A path of arc-length coordinates.
pub type ParamPath = DiscretePath<Vec<f64>>;
/// A path of curve points.
pub type CurvePath = DiscretePath<Vec<Complex64>>;

impl<S> DiscretePath<S> {
    pub fn new(dt: f64, states: Vec<S>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::DegeneratePath(format!("time step must be positive, got {dt}")));
        }
        if states.len() < 3 {
            return Err(Error::DegeneratePath(format!("need at least 3 grid points, got {}", states.len())));
        }
        Ok(Self { dt, states })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.states.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> DiscretePath<T> {
        DiscretePath { dt: self.dt, states: self.states.iter().map(f).collect() }
    }

    /// The same states traversed backwards in time.
    pub fn reversed(&self) -> Self
    where
        S: Clone,
    {
        DiscretePath { dt: self.dt, states: self.states.iter().rev().cloned().collect() }
    }
}

impl ParamPath {
    /// Joins cylinder states into a continuous path in `D`, undoing the `l·ê`
    /// jumps introduced by the quotient map.
    pub fn from_configurations(dt: f64, states: &[Configuration]) -> Result<Self> {
        let mut lifted: Vec<Vec<f64>> = Vec::with_capacity(states.len());
        for c in states {
            let mut x = c.positions().to_vec();
            if let Some(prev) = lifted.last() {
                let l = c.period();
                let shift = ((prev[0] - x[0]) / l).round() * l;
                x.iter_mut().for_each(|v| *v += shift);
            }
            lifted.push(x);
        }
        Self::new(dt, lifted)
    }
}

fn check_state(x: &[f64], l: f64, index: usize) -> Result<()> {
    if in_chamber(x, l) {
        Ok(())
    } else {
        Err(Error::DegeneratePath(format!("state {index} leaves the ordered chamber")))
    }
}

/// `½ Σ_k dt Σ_i (v_i − F_i(m))²` with `v = (x_{k+1} − x_k)/dt`, `m` the
/// midpoint of the step and `F = −∇V`. Shared by both rate functionals.
fn action(curve: &ArcLengthCurve, dt: f64, states: &[Vec<f64>]) -> Result<f64> {
    let l = curve.length();
    let n = states[0].len();
    let mut cache = PointCache::default();
    let mut force = vec![0.0; n];
    let mut mid = vec![0.0; n];
    let mut total = 0.0;
    for (k, w) in states.windows(2).enumerate() {
        if w[1].len() != n {
            return Err(Error::DegeneratePath(format!("state {} has {} particles, expected {n}", k + 1, w[1].len())));
        }
        check_state(&w[0], l, k)?;
        check_state(&w[1], l, k + 1)?;
        mid.iter_mut().zip(&w[0]).zip(&w[1]).for_each(|((m, a), b)| *m = 0.5 * (a + b));
        cache.fill(curve, &mid);
        forces_from_cache(curve, &cache, &mut force)
            .map_err(|e| Error::DegeneratePath(format!("step {k}: {e}")))?;
        total += w[0]
            .iter()
            .zip(&w[1])
            .zip(&force)
            .map(|((a, b), f)| ((b - a) / dt - f).powi(2))
            .sum::<f64>();
    }
    Ok(0.5 * dt * total)
}

/// Rate functional in arc-length coordinates,
/// `I(u) = ½ ∫ Σ_i |u̇_i − Σ_{j≠i} ℜ{γ′(u_i)/(γ(u_i) − γ(u_j))}|² dt`, restricted
/// to the path's horizon. Forward-difference velocities, drift at the step
/// midpoints; states must be lifts in `D` (see [`ParamPath::from_configurations`]).
pub fn rate_i(curve: &ArcLengthCurve, path: &ParamPath) -> Result<f64> {
    action(curve, path.dt, &path.states)
}

/// Lifts a curve path to continuous arc-length coordinates.
pub fn lift(curve: &ArcLengthCurve, path: &CurvePath) -> Result<ParamPath> {
    let l = curve.length();
    let mut lifted: Vec<Vec<f64>> = Vec::with_capacity(path.states.len());
    for (index, w) in path.states.iter().enumerate() {
        let prev = lifted.last();
        let mut s = Vec::with_capacity(w.len());
        for (i, &z) in w.iter().enumerate() {
            let hint = prev.map(|p| p[i]);
            let loc = curve.locate(z, hint);
            if loc.distance > ON_CURVE_TOL {
                return Err(Error::OffCurvePath { index, distance: loc.distance });
            }
            let anchor = match (prev, s.last()) {
                (Some(p), _) => p[i],
                // first state: place each particle just after its predecessor
                (None, Some(&last)) => last + 0.5 * l,
                (None, None) => loc.s,
            };
            s.push(loc.s + ((anchor - loc.s) / l).round() * l);
        }
        lifted.push(s);
    }
    ParamPath::new(path.dt, lifted)
}

/// Rate functional on the curve,
/// `J(w) = ½ ∫ Σ_i |ℜ{(ẇ_i − Σ_{j≠i} (w_i − w_j)/|w_i − w_j|²) conj τ(w_i)}|² dt`.
///
/// Points are projected onto `Γ` and lifted to arc length `s_i`, so that
/// `ℜ{ẇ_i conj τ(w_i)} = ṡ_i`; velocity and interaction are then evaluated as
/// in [`rate_i`], which makes `J(γ∘u) = I(u)` hold to rounding.
pub fn rate_j(curve: &ArcLengthCurve, path: &CurvePath) -> Result<f64> {
    let lifted = lift(curve, path)?;
    action(curve, lifted.dt, &lifted.states)
}

/// A real test function `f(x, y)` with its derivatives, expanded symbolically.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTestFunction {
    f: Polynomial,
    fx: Polynomial,
    fy: Polynomial,
    fxx: Polynomial,
    fxy: Polynomial,
    fyy: Polynomial,
}

impl CurveTestFunction {
    pub fn new(f: Polynomial) -> Self {
        let fx = f.dx();
        let fy = f.dy();
        Self { fxx: fx.dx(), fxy: fx.dy(), fyy: fy.dy(), fx, fy, f }
    }

    pub fn parse(expr: &str) -> Result<Self> {
        Polynomial::parse(expr).map(Self::new)
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.f
    }

    pub fn value(&self, z: Complex64) -> f64 {
        self.f.eval(z.re, z.im)
    }

    /// `∂_z f = ½(f_x − i f_y)`.
    pub fn dz(&self, z: Complex64) -> Complex64 {
        0.5 * Complex64::new(self.fx.eval(z.re, z.im), -self.fy.eval(z.re, z.im))
    }

    /// `∂_s f = 2ℜ(τ ∂_z f)` at a curve frame.
    pub fn ds_at(&self, frame: &CurveFrame) -> f64 {
        2.0 * (frame.tangent * self.dz(frame.point)).re
    }

    /// `∂_s² f = Hess f(τ, τ) + ∇f · γ″` at a curve frame.
    pub fn ds2_at(&self, frame: &CurveFrame) -> f64 {
        let (x, y) = (frame.point.re, frame.point.im);
        let (tx, ty) = (frame.tangent.re, frame.tangent.im);
        let hess = self.fxx.eval(x, y) * tx * tx + 2.0 * self.fxy.eval(x, y) * tx * ty + self.fyy.eval(x, y) * ty * ty;
        hess + self.fx.eval(x, y) * frame.acceleration.re + self.fy.eval(x, y) * frame.acceleration.im
    }

    pub fn ds(&self, curve: &ArcLengthCurve, s: f64) -> f64 {
        self.ds_at(&curve.frame(s))
    }

    pub fn ds2(&self, curve: &ArcLengthCurve, s: f64) -> f64 {
        self.ds2_at(&curve.frame(s))
    }
}

/// `(∂_s f)(z) = 2ℜ(τ(z) ∂_z f(z))` for a point `z` on `Γ`.
pub fn tangential_derivative(curve: &ArcLengthCurve, f: &CurveTestFunction, z: Complex64) -> Result<f64> {
    let loc = curve.locate(z, None);
    if loc.distance > ON_CURVE_TOL {
        return Err(Error::OffCurvePoint { distance: loc.distance });
    }
    Ok(2.0 * (curve.tangent(loc.s) * f.dz(z)).re)
}

/// A probability measure with finitely many atoms on `Γ`, given by arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    s: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(s: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if s.is_empty() || s.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "measure needs matching non-empty atoms and weights ({} vs {})",
                s.len(),
                weights.len()
            )));
        }
        if s.iter().chain(&weights).any(|v| !v.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { s, weights })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(s: Vec<f64>) -> Result<Self> {
        let n = s.len().max(1);
        Self::new(s, vec![1.0 / n as f64; n])
    }

    /// `n` atoms equally spaced in arc length.
    pub fn equidistant(curve: &ArcLengthCurve, n: usize) -> Result<Self> {
        let l = curve.length();
        Self::uniform((0..n).map(|k| k as f64 * l / n as f64).collect())
    }

    /// `(1/N) Σ δ_{γ(x_i)}`.
    pub fn empirical(config: &Configuration) -> Result<Self> {
        Self::uniform(config.positions().to_vec())
    }

    pub fn atoms(&self) -> &[f64] {
        &self.s
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, curve: &ArcLengthCurve, f: &CurveTestFunction) -> f64 {
        self.s.iter().zip(&self.weights).map(|(&s, w)| w * f.value(curve.point(s))).sum()
    }
}

/// `K(z, w) = ∂_s f(z) ℜ{τ(z)/(z−w)} − ∂_s f(w) ℜ{τ(w)/(z−w)}`, extended to
/// the diagonal by its limit `∂_s² f(z)`.
pub fn hydro_kernel(curve: &ArcLengthCurve, f: &CurveTestFunction, s_z: f64, s_w: f64) -> f64 {
    let (a, b) = (curve.frame(s_z), curve.frame(s_w));
    kernel(&Atom::new(f, &a), &Atom::new(f, &b))
}

struct Atom {
    z: Complex64,
    tau: Complex64,
    ds: f64,
    ds2: f64,
}

impl Atom {
    fn new(f: &CurveTestFunction, frame: &CurveFrame) -> Self {
        Self { z: frame.point, tau: frame.tangent, ds: f.ds_at(frame), ds2: f.ds2_at(frame) }
    }
}

fn kernel(a: &Atom, b: &Atom) -> f64 {
    let d = a.z - b.z;
    if d == Complex64::new(0.0, 0.0) {
        return a.ds2;
    }
    let inv = d.conj() / d.norm_sqr();
    a.ds * (a.tau * inv).re - b.ds * (b.tau * inv).re
}

/// `(β/4) ∬ K(z, w) μ(dz) μ(dw)`, the right-hand side of the mean-field
/// equation for `d μ_t(f)/dt`. Diagonal pairs contribute `w_a² ∂_s² f(z_a)`.
pub fn hydro_residual(curve: &ArcLengthCurve, f: &CurveTestFunction, mu: &DiscreteMeasure, beta: f64) -> f64 {
    let atoms: Vec<Atom> = mu.s.iter().map(|&s| Atom::new(f, &curve.frame(s))).collect();
    let w = &mu.weights;
    let mut sum = 0.0;
    for a in 0..atoms.len() {
        sum += w[a] * w[a] * atoms[a].ds2;
        let row: f64 = ((a + 1)..atoms.len()).map(|b| w[b] * kernel(&atoms[a], &atoms[b])).sum();
        sum += 2.0 * w[a] * row;
    }
    0.25 * beta * sum
}

/// Expected rate of change of `μ^{(N)}_t(f)` in the rescaled time `t` (real
/// time `t/N`) for the particle system at `config`:
/// `hydro_residual + (1/N)(½ − β/4) ∫ ∂_s² f dμ`.
pub fn particle_generator(curve: &ArcLengthCurve, f: &CurveTestFunction, config: &Configuration, beta: f64) -> Result<f64> {
    let mu = DiscreteMeasure::empirical(config)?;
    let n = config.len() as f64;
    let second: f64 = mu.s.iter().map(|&s| f.ds2(curve, s)).sum::<f64>() / n;
    Ok(hydro_residual(curve, f, &mu, beta) + (0.5 - 0.25 * beta) * second / n)
}

/// Monte-Carlo comparison of `Δμ^{(N)}(f)/window` with [`particle_generator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    pub n: usize,
    pub window: f64,
    pub predicted: f64,
    pub mean_residual: f64,
    pub stderr: f64,
    pub variance: f64,
}

/// Runs `replicas` trajectories of `n` particles from an equidistant start over
/// the rescaled time `window` and records
/// `(μ_window(f) − μ_0(f))/window − predicted`.
#[allow(clippy::too_many_arguments)]
pub fn particle_generator_check(
    curve: &ArcLengthCurve,
    f: &CurveTestFunction,
    beta: f64,
    n: usize,
    replicas: usize,
    window: f64,
    substeps: usize,
    seed: u64,
) -> Result<GeneratorCheck> {
    if replicas < 2 || substeps == 0 || !(window.is_finite() && window > 0.0) {
        return Err(Error::InvalidParameter("need ≥ 2 replicas, ≥ 1 substep and a positive window".into()));
    }
    let l = curve.length();
    let start = Configuration::equidistant(n, l, 0.0)?;
    let predicted = particle_generator(curve, f, &start, beta)?;
    let real_time = window / n as f64;
    let mut cfg = SimulationConfig::new(
        curve,
        InverseTemperature::from_beta(beta)?,
        Mode::BetaForm,
        real_time / substeps as f64,
        real_time,
        seed,
        start.clone(),
    );
    cfg.n_frames = 1;
    let seeds: Vec<u64> = (0..replicas as u64).map(|r| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r)).collect();
    let ends = final_states(&cfg, &seeds, &[real_time])?;
    let mu0 = DiscreteMeasure::empirical(&start)?.integrate(curve, f);
    let residuals: Vec<f64> = ends
        .iter()
        .map(|e| {
            let mu1 = e[0].positions().iter().map(|&s| f.value(curve.point(s))).sum::<f64>() / n as f64;
            (mu1 - mu0) / window - predicted
        })
        .collect();
    let (mean_residual, stderr) = stats::mean_and_stderr(&residuals);
    Ok(GeneratorCheck { n, window, predicted, mean_residual, stderr, variance: stats::variance(&residuals) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{unit_circle, CurveSpec};
    use crate::fekete::euler_path;
    use std::f64::consts::TAU;

    fn ellipse() -> ArcLengthCurve {
        ArcLengthCurve::new(CurveSpec::Ellipse { a: 2.0, b: 1.0 }, 1e-12).unwrap()
    }

    fn flow_path(curve: &ArcLengthCurve, x: Vec<f64>, dt: f64, horizon: f64) -> ParamPath {
        let start = Configuration::new(x, curve.length()).unwrap();
        let steps = (horizon / dt).round() as usize;
        ParamPath::new(dt, euler_path(curve, &start, dt, steps).unwrap()).unwrap()
    }

    #[test]
    fn constant_fekete_path_costs_nothing() {
        let c = unit_circle();
        let x = Configuration::equidistant(5, TAU, 0.2).unwrap().into_positions();
        let path = ParamPath::new(0.01, vec![x; 20]).unwrap();
        assert!(rate_i(&c, &path).unwrap() < 1e-28);
        let curve_path = path.map(|s| s.iter().map(|&v| c.point(v)).collect::<Vec<_>>());
        assert!(rate_j(&c, &curve_path).unwrap() < 1e-28);
    }

    #[test]
    fn gradient_flow_path_is_nearly_free() {
        let e = ellipse();
        let p = flow_path(&e, vec![0.1, 0.5, 2.0, 5.0], 1e-3, 1.0);
        let i = rate_i(&e, &p).unwrap();
        assert!(i <= 1e-4, "{i}");
        let reversed = rate_i(&e, &p.reversed()).unwrap();
        assert!(reversed > 1e3 * i);
    }

    #[test]
    fn reversed_flow_costs_twice_dirichlet() {
        let e = ellipse();
        let p = flow_path(&e, vec![0.1, 0.5, 2.0, 5.0], 1e-4, 0.5);
        let rev = rate_i(&e, &p.reversed()).unwrap();
        // oracle: trapezoid of 2‖∇V‖² on the grid
        let dirichlet: Vec<f64> = p
            .states()
            .iter()
            .map(|x| crate::coulomb::energy_gradient(&e, x).unwrap().iter().map(|g| g * g).sum())
            .collect();
        let m = dirichlet.len();
        let integral = p.dt() * (dirichlet.iter().sum::<f64>() - 0.5 * (dirichlet[0] + dirichlet[m - 1]));
        assert!((rev / (2.0 * integral) - 1.0).abs() < 1e-3, "{rev} vs {}", 2.0 * integral);
    }

    #[test]
    fn contraction_consistency() {
        let e = ellipse();
        let p = flow_path(&e, vec![0.3, 1.0, 2.5, 6.0], 1e-3, 0.5);
        let i = rate_i(&e, &p).unwrap();
        let w = p.map(|x| x.iter().map(|&s| e.point(s)).collect::<Vec<_>>());
        let j = rate_j(&e, &w).unwrap();
        assert!((j - i).abs() <= 1e-6 * i, "{j} vs {i}");
    }

    #[test]
    fn rigid_rotation_cost() {
        let c = unit_circle();
        let (n, v, dt, steps) = (6, 0.7, 0.01, 200);
        let states: Vec<Vec<Complex64>> = (0..=steps)
            .map(|k| {
                let shift = v * k as f64 * dt;
                (0..n).map(|i| Complex64::from_polar(1.0, TAU * i as f64 / n as f64 + shift)).collect()
            })
            .collect();
        let j = rate_j(&c, &CurvePath::new(dt, states).unwrap()).unwrap();
        let expected = n as f64 * v * v * (steps as f64 * dt) / 2.0;
        assert!((j - expected).abs() < 1e-10 * expected, "{j} vs {expected}");
    }

    #[test]
    fn path_errors() {
        let c = unit_circle();
        let bad = ParamPath::new(0.1, vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(rate_i(&c, &bad), Err(Error::DegeneratePath(_))));
        assert!(ParamPath::new(0.1, vec![vec![0.0, 1.0]; 2]).is_err());
        let off = CurvePath::new(0.1, vec![vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 1e-3)]; 3]).unwrap();
        // circle locate is exact radial projection: |(-1, 1e-3)| − 1 ≈ 5e-7
        assert!(matches!(rate_j(&c, &off), Err(Error::OffCurvePath { index: 0, .. })));
    }

    #[test]
    fn quotient_jumps_are_unwrapped() {
        let c = unit_circle();
        let p = flow_path(&c, vec![6.2, 6.25, 7.0], 1e-3, 0.3);
        let configs: Vec<Configuration> =
            p.states().iter().map(|x| crate::sde::quotient_map(x, TAU).unwrap()).collect();
        let rejoined = ParamPath::from_configurations(p.dt(), &configs).unwrap();
        let (a, b) = (rate_i(&c, &p).unwrap(), rate_i(&c, &rejoined).unwrap());
        assert!((a - b).abs() < 1e-9 * a.max(1e-12), "{a} {b}");
    }

    #[test]
    fn tangential_derivative_examples() {
        let c = unit_circle();
        let re = CurveTestFunction::parse("x").unwrap();
        assert!(tangential_derivative(&c, &re, Complex64::new(1.0, 0.0)).unwrap().abs() < 1e-15);
        assert!((tangential_derivative(&c, &re, Complex64::i()).unwrap() + 1.0).abs() < 1e-15);
        let r2 = CurveTestFunction::parse("x^2 + y^2").unwrap();
        for k in 0..8 {
            let z = Complex64::from_polar(1.0, 0.7 * k as f64);
            assert!(tangential_derivative(&c, &r2, z).unwrap().abs() < 1e-14);
        }
        assert!(matches!(
            tangential_derivative(&c, &re, Complex64::new(2.0, 0.0)),
            Err(Error::OffCurvePoint { .. })
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = ellipse();
        let f = CurveTestFunction::parse("x^3 - 2*x*y + y^2 + 0.5*y").unwrap();
        let h = 1e-4;
        for k in 0..12 {
            let s = 0.77 * k as f64;
            let g = |t: f64| f.value(e.point(t));
            let fd1 = (g(s + h) - g(s - h)) / (2.0 * h);
            let fd2 = (g(s + h) - 2.0 * g(s) + g(s - h)) / (h * h);
            assert!((f.ds(&e, s) - fd1).abs() < 1e-6, "{s}");
            assert!((f.ds2(&e, s) - fd2).abs() < 1e-5, "{s}");
        }
    }

    #[test]
    fn hydro_examples() {
        let c = unit_circle();
        let re = CurveTestFunction::parse("x").unwrap();
        let mu = DiscreteMeasure::equidistant(&c, 7).unwrap();
        assert!(hydro_residual(&c, &re, &mu, 2.0).abs() < 1e-10);

        // two atoms: direct four-term sum
        let (a, b) = (0.3, 2.0);
        let two = DiscreteMeasure::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let za = Complex64::from_polar(1.0, a);
        let zb = Complex64::from_polar(1.0, b);
        let (ta, tb) = (Complex64::i() * za, Complex64::i() * zb);
        let (da, db) = (-a.sin(), -b.sin());
        let (dda, ddb) = (-a.cos(), -b.cos());
        let k_ab = da * (ta / (za - zb)).re - db * (tb / (za - zb)).re;
        let k_ba = db * (tb / (zb - za)).re - da * (ta / (zb - za)).re;
        let direct = 0.25 * 3.0 * 0.25 * (dda + ddb + k_ab + k_ba);
        assert!((hydro_residual(&c, &re, &two, 3.0) - direct).abs() < 1e-14);
        // half the cotangent of the angle difference times the difference of derivatives
        assert!((k_ab - 0.5 / ((a - b) / 2.0).tan() * (da - db)).abs() < 1e-14);
    }

    #[test]
    fn uniform_circle_measure_is_stationary() {
        let c = unit_circle();
        let mu = DiscreteMeasure::equidistant(&c, 1 << 10).unwrap();
        for expr in ["x^3*y - y^2", "(x + 2*y)^4", "x^5 + x*y"] {
            let f = CurveTestFunction::parse(expr).unwrap();
            assert!(hydro_residual(&c, &f, &mu, 2.0).abs() < 1e-10, "{expr}");
        }
    }

    #[test]
    fn kernel_limit_on_the_diagonal() {
        let e = ellipse();
        let f = CurveTestFunction::parse("x^2*y + y^3 - x").unwrap();
        for s in [0.1, 1.9, 4.4] {
            let near = hydro_kernel(&e, &f, s, s + 1e-5);
            assert!((near - f.ds2(&e, s)).abs() < 1e-3, "{near}");
            assert_eq!(hydro_kernel(&e, &f, s, s), f.ds2(&e, s));
            let (k1, k2) = (hydro_kernel(&e, &f, s, s + 1.0), hydro_kernel(&e, &f, s + 1.0, s));
            assert!((k1 - k2).abs() < 1e-13);
        }
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn generator_check_is_centered() {
        let c = unit_circle();
        let f = CurveTestFunction::parse("x^2 - x*y").unwrap();
        let g = particle_generator_check(&c, &f, 2.0, 16, 200, 0.2, 20, 5).unwrap();
        assert!(g.mean_residual.abs() < 4.0 * g.stderr + 0.05, "{g:?}");
    }
}
