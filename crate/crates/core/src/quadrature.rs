//! Fixed-order Gauss–Legendre rules used for the arc-length table.

use num_complex::Complex64;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integral over `[a, a + width]`; the width enters exactly rather than as a
    /// difference of endpoints.
    pub fn integrate_complex<F: Fn(f64) -> Complex64>(&self, a: f64, width: f64, f: F) -> Complex64 {
        let half = 0.5 * width;
        let mid = a + half;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| f(mid + half * x) * w)
            .sum::<Complex64>()
            * half
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // degree 15 is the highest exact degree for 8 nodes
        let exact = (2.0f64.powi(16) - 1.0) / 16.0;
        let got = rule.integrate(1.0, 2.0, |x| x.powi(15));
        assert!((got - exact).abs() / exact < 1e-14, "{got} vs {exact}");
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 5, 8, 13] {
            let rule = GaussLegendre::new(n);
            assert_eq!(rule.len(), n);
            let total = rule.integrate(-3.0, 4.0, |_| 1.0);
            assert!((total - 7.0).abs() < 1e-13);
        }
    }

    #[test]
    fn smooth_integrand() {
        let rule = GaussLegendre::new(10);
        let got = rule.integrate(0.0, 1.0, f64::exp);
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }
}
