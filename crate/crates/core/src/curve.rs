//! Jordan curves and their arc-length parametrization.
//!
//! A curve is given analytically by a parameter map `θ ↦ γ₀(θ)` on one period
//! `[0, 2π)` (circle, ellipse or a finite Fourier series). [`ArcLengthCurve`]
//! reparametrizes it by arc length `s ∈ [0, l)` and extends it `l`-periodically.
//! Derivatives with respect to `s` are obtained from the exact `θ`-derivatives
//! by the chain rule, so `|γ′(s)| = 1` holds to rounding at every query point.
//!
//! The inverse map `s ↦ θ` is tabulated on a uniform `θ`-grid (cumulative
//! Gauss–Legendre sums), interpolated by a monotone cubic Hermite spline and
//! then polished with one Newton step against the exact cumulative integral.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Analytic description of a counterclockwise Jordan curve.
///
/// Serialized as `{"kind":"ellipse","a":2.0,"b":1.0}` or
/// `{"kind":"fourier","coeffs":[[re,im],...],"k_min":-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveSpec {
    /// `γ₀(θ) = r·e^{iθ}`.
    Circle { radius: f64 },
    /// `γ₀(θ) = a·cos θ + i·b·sin θ`.
    Ellipse { a: f64, b: f64 },
    /// `γ₀(θ) = Σ c_k e^{ikθ}` with `k = k_min, k_min + 1, …`.
    Fourier {
        coeffs: Vec<[f64; 2]>,
        #[serde(default)]
        k_min: i32,
    },
}

/// `γ₀` and its first two `θ`-derivatives.
#[derive(Debug, Clone, Copy)]
struct ParamJet {
    z: Complex64,
    d1: Complex64,
    d2: Complex64,
}

/// Precomputed evaluator for a [`CurveSpec`].
#[derive(Debug, Clone)]
enum Shape {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Fourier { terms: Vec<(f64, Complex64)> },
}

impl Shape {
    fn from_spec(spec: &CurveSpec) -> Result<Self> {
        match *spec {
            CurveSpec::Circle { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidCurve(format!("circle radius must be positive, got {radius}")));
                }
                Ok(Shape::Circle { radius })
            }
            CurveSpec::Ellipse { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                    return Err(Error::InvalidCurve(format!("ellipse semi-axes must be positive, got a={a}, b={b}")));
                }
                Ok(Shape::Ellipse { a, b })
            }
            CurveSpec::Fourier { ref coeffs, k_min } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidCurve("fourier curve needs at least one coefficient".into()));
                }
                if coeffs.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidCurve("fourier coefficients must be finite".into()));
                }
                let k_max = i64::from(k_min) + coeffs.len() as i64 - 1;
                if k_max > i64::from(i32::MAX) || k_max.abs() > 1 << 16 || i64::from(k_min).abs() > 1 << 16 {
                    return Err(Error::InvalidCurve("fourier mode indices out of range".into()));
                }
                let terms = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| ((k_min as i64 + i as i64) as f64, Complex64::new(c[0], c[1])))
                    .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                    .collect::<Vec<_>>();
                Ok(Shape::Fourier { terms })
            }
        }
    }

    fn jet(&self, theta: f64) -> ParamJet {
        match *self {
            Shape::Circle { radius } => {
                let e = Complex64::from_polar(1.0, theta);
                ParamJet { z: e * radius, d1: Complex64::i() * e * radius, d2: -e * radius }
            }
            Shape::Ellipse { a, b } => {
                let (sin, cos) = theta.sin_cos();
                ParamJet {
                    z: Complex64::new(a * cos, b * sin),
                    d1: Complex64::new(-a * sin, b * cos),
                    d2: Complex64::new(-a * cos, -b * sin),
                }
            }
            Shape::Fourier { ref terms } => {
                let mut jet = ParamJet { z: Complex64::default(), d1: Complex64::default(), d2: Complex64::default() };
                for &(k, c) in terms {
                    let t = c * Complex64::from_polar(1.0, k * theta);
                    jet.z += t;
                    jet.d1 += t * Complex64::new(0.0, k);
                    jet.d2 -= t * (k * k);
                }
                jet
            }
        }
    }

    fn speed(&self, theta: f64) -> f64 {
        self.jet(theta).d1.norm()
    }

    fn max_mode(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Ellipse { .. } => 1,
            Shape::Fourier { terms } => terms.iter().map(|(k, _)| k.abs() as usize).max().unwrap_or(0).max(1),
        }
    }
}

impl CurveSpec {
    /// Checks regularity, the Jordan property and counterclockwise orientation
    /// on a dense parameter grid.
    pub fn validate(&self) -> Result<()> {
        let shape = Shape::from_spec(self)?;
        check_shape(&shape)
    }
}

fn check_shape(shape: &Shape) -> Result<()> {
    let grid = (32 * shape.max_mode()).clamp(512, 4096);
    let h = TAU / grid as f64;
    let jets: Vec<ParamJet> = (0..grid).map(|g| shape.jet(g as f64 * h)).collect();

    let max_speed = jets.iter().map(|j| j.d1.norm()).fold(0.0, f64::max);
    if !(max_speed.is_finite() && max_speed > 0.0) {
        return Err(Error::NonRegularCurve { theta: 0.0, speed: max_speed });
    }
    for (g, j) in jets.iter().enumerate() {
        let speed = j.d1.norm();
        if speed <= 1e-9 * max_speed {
            return Err(Error::NonRegularCurve { theta: g as f64 * h, speed });
        }
    }

    // Signed area via the trapezoid rule, which is spectrally accurate here.
    let area: f64 = jets.iter().map(|j| (j.z.conj() * j.d1).im).sum::<f64>() * 0.5 * h;
    if area <= 0.0 {
        return Err(Error::InvalidCurve(format!(
            "curve must be oriented counterclockwise (signed area {area:.3e})"
        )));
    }

    let mean_speed = jets.iter().map(|j| j.d1.norm()).sum::<f64>() / grid as f64;
    for a in 0..grid {
        for b in (a + 1)..grid {
            let gap = (b - a).min(grid - (b - a)) as f64 * h;
            let ratio = (jets[a].z - jets[b].z).norm() / gap;
            if ratio <= 1e-9 * mean_speed {
                return Err(Error::SelfIntersection { theta_a: a as f64 * h, theta_b: b as f64 * h });
            }
            // Polyline crossings between non-adjacent segments.
            if b >= a + 2 && !(a == 0 && b == grid - 1) {
                let p1 = jets[a].z;
                let p2 = jets[(a + 1) % grid].z;
                let q1 = jets[b].z;
                let q2 = jets[(b + 1) % grid].z;
                if segments_cross(p1, p2, q1, q2) {
                    return Err(Error::SelfIntersection { theta_a: a as f64 * h, theta_b: b as f64 * h });
                }
            }
        }
    }
    Ok(())
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Point, unit tangent `γ′` and acceleration `γ″` at one arc-length value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFrame {
    pub point: Complex64,
    pub tangent: Complex64,
    pub acceleration: Complex64,
}

impl CurveFrame {
    /// Signed curvature `ℑ{γ″ · conj(γ′)}`.
    pub fn curvature(&self) -> f64 {
        (self.acceleration * self.tangent.conj()).im
    }
}

/// Result of projecting a plane point onto the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    /// Arc-length parameter in `[0, l)`.
    pub s: f64,
    /// Euclidean distance from the query point to `γ(s)`.
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct ArcTable {
    /// `θ` step of the uniform grid.
    step: f64,
    /// Cumulative arc length at `θ_k = k·step`, `k = 0..=M`.
    s_nodes: Vec<f64>,
    /// `|dγ₀/dθ|` at the grid nodes.
    speed: Vec<f64>,
    rule: GaussLegendre,
}

#[derive(Debug, Clone)]
enum Param {
    /// Exact: `θ = s / r`.
    Circle { radius: f64 },
    Table(ArcTable),
}

/// Unit-speed, `l`-periodic parametrization `γ` of a Jordan curve.
///
/// Immutable after construction and cheap to share between threads.
#[derive(Debug, Clone)]
pub struct ArcLengthCurve {
    spec: CurveSpec,
    shape: Shape,
    param: Param,
    length: f64,
    smoothness_order: u32,
}

const CELL_NODES: usize = 10;
/// Arcs shorter than this fraction of `l` use the integrated chord.
pub const SHORT_ARC: f64 = 1e-2;
const MAX_GRID: usize = 1 << 18;

impl ArcLengthCurve {
    /// Builds the arc-length parametrization with relative accuracy `tol`,
    /// which must lie in `(0, 1e-4]`.
    pub fn new(spec: CurveSpec, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-4) {
            return Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1e-4], got {tol}")));
        }
        let shape = Shape::from_spec(&spec)?;
        check_shape(&shape)?;

        let (param, length) = match shape {
            Shape::Circle { radius } => (Param::Circle { radius }, TAU * radius),
            _ => {
                let table = build_table(&shape, tol)?;
                let length = *table.s_nodes.last().expect("table has nodes");
                // Independent adaptive check of the total length; the
                // double-exponential rule stalls near 1e-11 relative.
                let adaptive = quadrature::integrate(|t| shape.speed(t), 0.0, TAU, 0.01 * tol * length);
                let allowed = (tol.max(1e-9) * length).max(4.0 * adaptive.error_estimate);
                if (adaptive.integral - length).abs() > allowed {
                    return Err(Error::InvalidCurve(format!(
                        "arc-length quadrature did not converge ({} vs {})",
                        adaptive.integral, length
                    )));
                }
                (Param::Table(table), length)
            }
        };

        Ok(Self { spec, shape, param, length, smoothness_order: 2 })
    }

    /// Caps the number of derivatives treated as reliable.
    pub fn with_smoothness_order(mut self, order: u32) -> Self {
        self.smoothness_order = order.clamp(1, 2);
        self
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    /// Total length `l`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn smoothness_order(&self) -> u32 {
        self.smoothness_order
    }

    /// Radius if the curve is a circle centred at the origin.
    pub fn circle_radius(&self) -> Option<f64> {
        match self.param {
            Param::Circle { radius } => Some(radius),
            Param::Table(_) => None,
        }
    }

    /// Reduces `s` to `[0, l)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let r = s.rem_euclid(self.length);
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    /// Original curve parameter `θ ∈ [0, 2π)` of the point at arc length `s`.
    pub fn theta_at(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        match &self.param {
            Param::Circle { radius } => s / radius,
            Param::Table(table) => table.theta_of(&self.shape, s),
        }
    }

    /// Point, tangent and acceleration at arc length `s`.
    pub fn frame(&self, s: f64) -> CurveFrame {
        let theta = self.theta_at(s);
        match self.param {
            Param::Circle { radius } => {
                let e = Complex64::from_polar(1.0, theta);
                CurveFrame { point: e * radius, tangent: Complex64::i() * e, acceleration: -e / radius }
            }
            Param::Table(_) => {
                let jet = self.shape.jet(theta);
                let speed = jet.d1.norm();
                let dtheta = 1.0 / speed;
                let d2theta = -(jet.d2 * jet.d1.conj()).re / speed.powi(4);
                CurveFrame {
                    point: jet.z,
                    tangent: jet.d1 * dtheta,
                    acceleration: jet.d2 * (dtheta * dtheta) + jet.d1 * d2theta,
                }
            }
        }
    }

    /// `γ(s)`.
    pub fn point(&self, s: f64) -> Complex64 {
        let theta = self.theta_at(s);
        match self.param {
            Param::Circle { radius } => Complex64::from_polar(radius, theta),
            Param::Table(_) => self.shape.jet(theta).z,
        }
    }

    /// Point and unit tangent, the pair needed by the interaction sums.
    pub fn point_and_tangent(&self, s: f64) -> (Complex64, Complex64) {
        let theta = self.theta_at(s);
        match self.param {
            Param::Circle { radius } => {
                let e = Complex64::from_polar(1.0, theta);
                (e * radius, Complex64::i() * e)
            }
            Param::Table(_) => {
                let jet = self.shape.jet(theta);
                (jet.z, jet.d1 / jet.d1.norm())
            }
        }
    }

    /// `γ(a) − γ(b)`, accurate to relative rounding also when the two points
    /// are close: the difference is integrated from the tangent over the shorter
    /// arc instead of subtracting nearly equal points.
    pub fn chord(&self, a: f64, b: f64) -> Complex64 {
        let l = self.length;
        // small differences stay exact: wrap only when outside (−l/2, l/2]
        let mut delta = a - b;
        if delta.abs() > 0.5 * l {
            delta = delta.rem_euclid(l);
            if delta > 0.5 * l {
                delta -= l;
            }
        }
        match &self.param {
            Param::Circle { radius } => {
                let mid = (b + 0.5 * delta) / radius;
                Complex64::from_polar(2.0 * radius * (0.5 * delta / radius).sin(), mid + 0.5 * PI)
            }
            Param::Table(table) if delta.abs() < SHORT_ARC * l => {
                table.rule.integrate_complex(b, delta, |s| self.tangent(s))
            }
            Param::Table(_) => self.point(a) - self.point(b),
        }
    }

    /// Unit tangent `γ′(s) = τ(γ(s))`.
    pub fn tangent(&self, s: f64) -> Complex64 {
        self.point_and_tangent(s).1
    }

    /// Signed curvature at `γ(s)`; positive everywhere on convex curves.
    pub fn curvature(&self, s: f64) -> Result<f64> {
        if self.smoothness_order < 2 {
            return Err(Error::InsufficientSmoothness { required: 2, available: self.smoothness_order });
        }
        Ok(self.frame(s).curvature())
    }

    /// Nearest curve point to `w`, starting Newton from `hint` when given.
    pub fn locate(&self, w: Complex64, hint: Option<f64>) -> Located {
        if let Param::Circle { radius } = self.param {
            let s = self.wrap(w.arg() * radius);
            return Located { s, distance: (w.norm() - radius).abs() };
        }
        let mut s = match hint {
            Some(h) => self.wrap(h),
            None => {
                let samples = 1024;
                (0..samples)
                    .map(|k| k as f64 * self.length / samples as f64)
                    .min_by(|a, b| {
                        let da = (self.point(*a) - w).norm_sqr();
                        let db = (self.point(*b) - w).norm_sqr();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0.0)
            }
        };
        let max_step = self.length / 64.0;
        for _ in 0..50 {
            let f = self.frame(s);
            let diff = f.point - w;
            let g = (diff * f.tangent.conj()).re;
            let dg = 1.0 + (diff * f.acceleration.conj()).re;
            let step = if dg > 0.1 { g / dg } else { g };
            let step = step.clamp(-max_step, max_step);
            s = self.wrap(s - step);
            if step.abs() <= 1e-15 * self.length {
                break;
            }
        }
        Located { s, distance: (self.point(s) - w).norm() }
    }
}

fn build_table(shape: &Shape, tol: f64) -> Result<ArcTable> {
    let rule = GaussLegendre::new(CELL_NODES);
    let mut cells = (32 * shape.max_mode()).next_power_of_two().max(256);
    loop {
        let step = TAU / cells as f64;
        let mut s_nodes = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        s_nodes.push(0.0);
        for k in 0..cells {
            let a = k as f64 * step;
            acc += rule.integrate(a, a + step, |t| shape.speed(t));
            s_nodes.push(acc);
        }
        let speed = (0..=cells).map(|k| shape.speed(k as f64 * step)).collect();
        let table = ArcTable { step, s_nodes, speed, rule: rule.clone() };

        let length = acc;
        let worst = (0..cells)
            .map(|k| {
                let s_mid = 0.5 * (table.s_nodes[k] + table.s_nodes[k + 1]);
                let guess = table.hermite(k, s_mid);
                (table.cumulative(shape, k, guess) - s_mid).abs()
            })
            .fold(0.0, f64::max);
        if worst <= tol * length {
            return Ok(table);
        }
        if cells >= MAX_GRID {
            return Err(Error::InvalidCurve(format!(
                "arc-length table did not reach tolerance {tol:e} (error {worst:.3e})"
            )));
        }
        cells *= 2;
    }
}

impl ArcTable {
    fn cells(&self) -> usize {
        self.s_nodes.len() - 1
    }

    fn cell_of(&self, s: f64) -> usize {
        let cells = self.cells();
        let length = self.s_nodes[cells];
        let mut k = ((s / length) * cells as f64) as usize;
        k = k.min(cells - 1);
        while k > 0 && s < self.s_nodes[k] {
            k -= 1;
        }
        while k + 1 < cells && s >= self.s_nodes[k + 1] {
            k += 1;
        }
        k
    }

    /// Monotone cubic Hermite interpolation of `θ(s)` inside cell `k`.
    fn hermite(&self, k: usize, s: f64) -> f64 {
        let s0 = self.s_nodes[k];
        let s1 = self.s_nodes[k + 1];
        let ds = s1 - s0;
        let t0 = k as f64 * self.step;
        let secant = self.step / ds;
        let mut m0 = 1.0 / self.speed[k];
        let mut m1 = 1.0 / self.speed[k + 1];
        // Fritsch–Carlson limiter.
        let a = m0 / secant;
        let b = m1 / secant;
        let r = a * a + b * b;
        if r > 9.0 {
            let scale = 3.0 / r.sqrt();
            m0 *= scale;
            m1 *= scale;
        }
        let u = (s - s0) / ds;
        let u2 = u * u;
        let u3 = u2 * u;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        t0 + h10 * ds * m0 + h01 * self.step + h11 * ds * m1
    }

    /// Arc length from `θ = 0` to `theta`, where `theta` lies in cell `k`.
    fn cumulative(&self, shape: &Shape, k: usize, theta: f64) -> f64 {
        let t0 = k as f64 * self.step;
        self.s_nodes[k] + self.rule.integrate(t0, theta, |t| shape.speed(t))
    }

    fn theta_of(&self, shape: &Shape, s: f64) -> f64 {
        let k = self.cell_of(s);
        let lo = k as f64 * self.step;
        let hi = lo + self.step;
        let mut theta = self.hermite(k, s).clamp(lo, hi);
        for _ in 0..3 {
            let residual = self.cumulative(shape, k, theta) - s;
            let delta = residual / shape.speed(theta);
            theta = (theta - delta).clamp(lo, hi);
            if delta.abs() <= 4.0 * f64::EPSILON * (1.0 + theta.abs()) {
                break;
            }
        }
        if theta >= TAU {
            theta - TAU
        } else {
            theta
        }
    }
}

/// Convenience constructor for the unit circle.
pub fn unit_circle() -> ArcLengthCurve {
    ArcLengthCurve::new(CurveSpec::Circle { radius: 1.0 }, 1e-10).expect("unit circle is valid")
}

/// Circle-distance between two angles in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d).min(PI)
}
