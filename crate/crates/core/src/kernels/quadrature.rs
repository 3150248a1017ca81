//! Gauss-Legendre rules, plain and graded toward a singular endpoint.

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
        h * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
    }

    /// Integral over the segment between `s` and `other` (orientation
    /// ignored) with t = s + (other - s) u^p, which removes a |t - s|^(-r)
    /// singularity when p = 1 / (1 - r).
    pub fn graded(&self, s: f64, other: f64, p: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = (other - s).abs();
        self.integrate(0.0, 1.0, |u| {
            if u <= 0.0 {
                return 0.0;
            }
            f(s + (other - s) * u.powf(p)) * len * p * u.powf(p - 1.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_and_graded_singularity() {
        let g = GaussLegendre::new(24);
        assert!((g.integrate(0.0, 2.0, |x| x.powi(7)) - 32.0).abs() < 1e-12);
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let r: f64 = 0.9;
        let exact = 1.0 / (1.0 - r);
        assert!((g.graded(0.0, 1.0, 1.0 / (1.0 - r), |t| t.powf(-r)) - exact).abs() < 1e-10);
        assert!((g.graded(0.0, -1.0, 1.0 / (1.0 - r), |t| (-t).powf(-r)) - exact).abs() < 1e-10);
    }
}
