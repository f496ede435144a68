//! Logarithmic interaction on the curve: energy, stationary density, drift and
//! discriminant.
//!
//! With `z_i = γ(x_i)` the energy is `V(x) = −Σ_{i<j} log|z_i − z_j|` and the
//! unnormalized stationary density is `∏_{i≠j} |z_i − z_j|^{β/2} = e^{−βV}`.
//! The product runs over ordered pairs, so each unordered pair carries the
//! exponent `β`. The drift of the parametrization process is
//! `b_i = (β/2) Σ_{j≠i} ℜ{γ′(x_i) / (z_i − z_j)} = −(β/2) ∂_i V`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{ArcLengthCurve, SHORT_ARC};
use crate::error::{Error, Result};

/// Chord lengths below this are treated as collisions.
pub const MIN_CHORD: f64 = 1e-300;

/// Ordered particle positions in the cylinder
/// `E = {0 ≤ x₁ < x₂ < … < x_N < x₁ + l < 2l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    positions: Vec<f64>,
    period: f64,
}

impl Configuration {
    /// Validates membership in `E`.
    pub fn new(positions: Vec<f64>, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
        }
        if positions.is_empty() {
            return Err(Error::DomainViolation("configuration needs at least one particle".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainViolation("positions must be finite".into()));
        }
        let first = positions[0];
        if !(0.0..period).contains(&first) {
            return Err(Error::DomainViolation(format!("x₁ = {first} outside [0, {period})")));
        }
        check_strict_order(&positions, period)?;
        Ok(Self { positions, period })
    }

    /// `n` points at equal arc-length spacing starting at `offset ∈ [0, l/n)`.
    pub fn equidistant(n: usize, period: f64, offset: f64) -> Result<Self> {
        let step = period / n as f64;
        Self::new((0..n).map(|i| offset + i as f64 * step).collect(), period)
    }

    pub(crate) fn from_parts_unchecked(positions: Vec<f64>, period: f64) -> Self {
        Self { positions, period }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The curve length `l`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Consecutive gaps `x_{i+1} − x_i`, the last one being `x₁ + l − x_N`.
    pub fn gaps(&self) -> Vec<f64> {
        cyclic_gaps(&self.positions, self.period)
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().into_iter().fold(f64::INFINITY, f64::min)
    }
}

impl AsRef<[f64]> for Configuration {
    fn as_ref(&self) -> &[f64] {
        &self.positions
    }
}

/// Gaps of an ordered point set on a circle of circumference `period`.
pub fn cyclic_gaps(x: &[f64], period: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| if i + 1 < n { x[i + 1] - x[i] } else { x[0] + period - x[n - 1] })
        .collect()
}

/// Strict membership in the chamber `D = {x₁ < x₂ < … < x_N < x₁ + l}`.
pub fn in_chamber(x: &[f64], period: f64) -> bool {
    !x.is_empty()
        && x.iter().all(|v| v.is_finite())
        && x.windows(2).all(|w| w[0] < w[1])
        && x[x.len() - 1] < x[0] + period
}

fn check_strict_order(x: &[f64], period: f64) -> Result<()> {
    if let Some(i) = x.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::DomainViolation(format!(
            "positions not strictly increasing at index {i}: {} ≥ {}",
            x[i],
            x[i + 1]
        )));
    }
    let n = x.len();
    if x[n - 1] >= x[0] + period {
        return Err(Error::DomainViolation(format!(
            "x_N = {} ≥ x₁ + l = {}",
            x[n - 1],
            x[0] + period
        )));
    }
    Ok(())
}

/// Inverse temperature `β` together with the diffusion parameter `κ = 2/β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseTemperature {
    beta: f64,
    kappa: f64,
}

impl InverseTemperature {
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || beta.is_nan() {
            return Err(Error::InvalidTemperature(format!("β must be positive, got {beta}")));
        }
        Ok(Self { beta, kappa: 2.0 / beta })
    }

    /// `κ = 0` is the zero-noise limit `β = ∞`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidTemperature(format!("κ must be finite and non-negative, got {kappa}")));
        }
        Ok(Self { beta: 2.0 / kappa, kappa })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Curve points and unit tangents for a set of positions.
#[derive(Debug, Clone, Default)]
pub struct PointCache {
    pub positions: Vec<f64>,
    pub points: Vec<Complex64>,
    pub tangents: Vec<Complex64>,
}

impl PointCache {
    pub fn fill(&mut self, curve: &ArcLengthCurve, x: &[f64]) {
        self.positions.clear();
        self.positions.extend_from_slice(x);
        self.points.clear();
        self.tangents.clear();
        for &xi in x {
            let (z, t) = curve.point_and_tangent(xi);
            self.points.push(z);
            self.tangents.push(t);
        }
    }

    pub fn new(curve: &ArcLengthCurve, x: &[f64]) -> Self {
        let mut cache = Self::default();
        cache.fill(curve, x);
        cache
    }
}

fn coincident(i: usize, j: usize) -> Error {
    Error::DegenerateConfiguration(format!("particles {i} and {j} coincide"))
}

/// `V(x) = −Σ_{i<j} log|γ(x_i) − γ(x_j)|`.
///
/// Returns `+∞` when a chord is shorter than [`MIN_CHORD`] and an error when two
/// curve points coincide exactly.
pub fn energy(curve: &ArcLengthCurve, x: &[f64]) -> Result<f64> {
    energy_of_points(&PointCache::new(curve, x).points)
}

/// Energy of explicit curve points; same conventions as [`energy`].
pub fn energy_of_points(z: &[Complex64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut collapsed = false;
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            let chord = (z[i] - z[j]).norm();
            if chord == 0.0 {
                return Err(coincident(i, j));
            }
            if chord < MIN_CHORD {
                collapsed = true;
            } else {
                sum -= chord.ln();
            }
        }
    }
    Ok(if collapsed { f64::INFINITY } else { sum })
}

/// `log ∏_{i≠j} |γ(x_i) − γ(x_j)|^{β/2} = −β·V(x)`, without the partition function.
pub fn log_density_unnormalized(curve: &ArcLengthCurve, x: &[f64], beta: f64) -> Result<f64> {
    Ok(-beta * energy(curve, x)?)
}

/// Interaction force `F_i = Σ_{j≠i} ℜ{τ_i / (z_i − z_j)} = −∂_i V`, written into `out`.
///
/// Chords shorter than [`SHORT_ARC`]`·l` are recomputed with
/// [`ArcLengthCurve::chord`] to avoid cancellation in `z_i − z_j`.
pub fn forces_from_cache(curve: &ArcLengthCurve, cache: &PointCache, out: &mut [f64]) -> Result<()> {
    let z = &cache.points;
    let t = &cache.tangents;
    let x = &cache.positions;
    let n = z.len();
    let short = SHORT_ARC * curve.length();
    out[..n].iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d = z[i] - z[j];
            if d.norm() < short {
                d = curve.chord(x[i], x[j]);
            }
            let r = d.norm();
            if r == 0.0 {
                return Err(coincident(i, j));
            }
            if r < MIN_CHORD {
                return Err(Error::DegenerateConfiguration(format!(
                    "chord between particles {i} and {j} underflows ({r:e})"
                )));
            }
            // 1/d computed as conj(d)/r² without squaring tiny numbers
            let inv = d.conj() / r / r;
            out[i] += (t[i] * inv).re;
            out[j] -= (t[j] * inv).re;
        }
    }
    Ok(())
}

/// `∇V(x)`.
pub fn energy_gradient(curve: &ArcLengthCurve, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    forces_from_cache(curve, &PointCache::new(curve, x), &mut out)?;
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(out)
}

/// Drift `b_{β,N}(x) = ½∇log ρ_{β,N}(x) = −(β/2)∇V(x)`.
pub fn drift(curve: &ArcLengthCurve, x: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    forces_from_cache(curve, &PointCache::new(curve, x), &mut out)?;
    let half_beta = 0.5 * beta;
    out.iter_mut().for_each(|v| *v *= half_beta);
    Ok(out)
}

/// `log Δ_N = Σ_{k≠ℓ} log|z_k − z_ℓ| = −2·V`.
pub fn log_discriminant(points: &[Complex64]) -> Result<f64> {
    let e = energy_of_points(points)?;
    Ok(-2.0 * e)
}

/// `Δ_N = ∏_{k≠ℓ} |z_k − z_ℓ|`. Overflows to `+∞` for large point sets; use
/// [`log_discriminant`] there.
pub fn discriminant(points: &[Complex64]) -> Result<f64> {
    Ok(log_discriminant(points)?.exp())
}
