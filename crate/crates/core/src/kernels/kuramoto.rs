//! Kuramoto-type collision models on the circle. The outgoing pair is drawn
//! independently and uniformly on an arc of length a(|xi|) centered at the
//! midpoint of the incoming pair.

use super::grids::CircleGrid;
use super::quadrature::GaussLegendre;
use crate::boltzmann::{check_symmetries, factorization_residual, symmetrize, CollisionKernel, FactorizationResidual, PairTransition, ProductComponent, SymmetryReport};
use crate::error::{Error, Result};
use crate::measures::ProbabilityVector;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KuramotoVariant {
    /// a(r) = pi for r < delta, r otherwise
    A { delta: f64 },
    /// arc |xi| with probability 1 - eps, the half circle with probability eps
    B { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KuramotoModel {
    variant: KuramotoVariant,
}

/// Positive root of r (r + 1) = 2 (1 - eps).
pub fn r_from_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let r = 0.5 * (-1.0 + (1.0 + 8.0 * (1.0 - epsilon)).sqrt());
    debug_assert!((r * (r + 1.0) - 2.0 * (1.0 - epsilon)).abs() < 1e-14);
    Ok(r)
}

fn check_xi(xi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&xi) {
        return Err(Error::Invalid(format!("arc length {xi} outside [0, pi]")));
    }
    Ok(())
}

/// Closed-form collision rate of variant A, affine below delta.
pub fn kuramoto_lambda_a(xi: f64, delta: f64) -> Result<f64> {
    check_xi(xi)?;
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::Invalid(format!("delta must lie in (0, pi), got {delta}")));
    }
    let p3 = PI.powi(3);
    Ok(if xi <= delta {
        2.0 / 3.0 * (1.0 / delta - delta * delta / p3) - 2.0 / 3.0 * (1.0 / (delta * delta) + 2.0 * delta / p3) * (xi - delta)
    } else {
        2.0 / 3.0 * (1.0 / xi - xi * xi / p3)
    })
}

/// Closed-form collision rate of variant B; +inf at xi = 0.
pub fn kuramoto_lambda_b(xi: f64, epsilon: f64) -> Result<f64> {
    check_xi(xi)?;
    let r = r_from_epsilon(epsilon)?;
    if xi == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((PI / xi).powf(r) - (xi / PI).powf(1.0 + r)) / (1.0 + 2.0 * r))
}

impl KuramotoModel {
    pub fn variant_a(delta: f64) -> Result<Self> {
        kuramoto_lambda_a(0.0, delta)?;
        Ok(Self { variant: KuramotoVariant::A { delta } })
    }

    pub fn variant_b(epsilon: f64) -> Result<Self> {
        r_from_epsilon(epsilon)?;
        Ok(Self { variant: KuramotoVariant::B { epsilon } })
    }

    pub fn variant(&self) -> KuramotoVariant {
        self.variant
    }

    /// Exponent r of variant B.
    pub fn r(&self) -> Option<f64> {
        match self.variant {
            KuramotoVariant::B { epsilon } => r_from_epsilon(epsilon).ok(),
            KuramotoVariant::A { .. } => None,
        }
    }

    pub fn lambda(&self, xi: f64) -> Result<f64> {
        match self.variant {
            KuramotoVariant::A { delta } => kuramoto_lambda_a(xi, delta),
            KuramotoVariant::B { epsilon } => kuramoto_lambda_b(xi, epsilon),
        }
    }

    /// (weight, arc length) of the outgoing components at distance xi.
    pub fn arc_components(&self, xi: f64) -> Vec<(f64, f64)> {
        match self.variant {
            KuramotoVariant::A { delta } => vec![(1.0, if xi < delta { PI } else { xi })],
            KuramotoVariant::B { epsilon } => vec![(1.0 - epsilon, xi), (epsilon, PI)],
        }
    }

    /// Points where lambda is not smooth, besides 0 and pi.
    fn kinks(&self) -> Vec<f64> {
        match self.variant {
            KuramotoVariant::A { delta } => vec![delta],
            KuramotoVariant::B { .. } => vec![],
        }
    }

    /// lambda averaged over the distance law of two points drawn uniformly
    /// from bins `steps` apart: the difference has a triangular density on
    /// [D - w, D + w], folded onto [0, pi].
    pub fn bin_averaged_lambda(&self, grid: &CircleGrid, steps: usize) -> f64 {
        let w = grid.width();
        let d = steps as f64 * w;
        let gl = GaussLegendre::new(24);
        let grade = self.r().map(|r| 1.0 / (1.0 - r)).unwrap_or(1.0);
        let mut cuts = vec![d - w, d, d + w];
        for k in self.kinks().into_iter().chain([0.0, PI]) {
            for s in [k, -k, 2.0 * PI - k] {
                if s > d - w && s < d + w {
                    cuts.push(s);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let fold = |t: f64| {
            let a = t.abs().rem_euclid(2.0 * PI);
            a.min(2.0 * PI - a).clamp(0.0, PI)
        };
        let f = |t: f64| (w - (t - d).abs()) / (w * w) * self.lambda(fold(t)).unwrap_or(0.0);
        let mut tot = 0.0;
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b - a <= 0.0 {
                continue;
            }
            // grade toward a folded zero distance, where variant B is singular
            if grade > 1.0 && fold(a) < 1e-12 {
                tot += gl.graded(a, b, grade, &f);
            } else if grade > 1.0 && fold(b) < 1e-12 {
                tot += gl.graded(b, a, grade, &f);
            } else {
                tot += gl.integrate(a, b, &f);
            }
        }
        tot
    }

    /// (xi, lambda) on a uniform grid of [0, pi], excluding 0 for variant B.
    pub fn lambda_curve(&self, n_points: usize) -> Result<Vec<(f64, f64)>> {
        if n_points < 2 {
            return Err(Error::Invalid("need at least two curve points".into()));
        }
        let start = if self.r().is_some() { 1 } else { 0 };
        (start..n_points)
            .map(|k| {
                let xi = PI * k as f64 / (n_points - 1) as f64;
                Ok((xi, self.lambda(xi)?))
            })
            .collect()
    }
}

/// Outgoing components per incoming bin pair: one product component per
/// (arc component, midpoint slot).
fn components(model: &KuramotoModel, grid: &CircleGrid) -> Vec<ProductComponent> {
    let m = grid.n_bins();
    let arcs = model.arc_components(0.0);
    let mut out: Vec<ProductComponent> = Vec::new();
    for (c, (wc, _)) in arcs.iter().enumerate() {
        for slot in 0..2 {
            let mut marginal = vec![0.0; m * m * m];
            for i in 0..m {
                for j in 0..m {
                    let d = grid.distance(i, j);
                    let mids = grid.midpoints(i, j);
                    let a = model.arc_components(d)[c].1;
                    let p = grid.arc_masses(mids[slot.min(mids.len() - 1)], a);
                    marginal[(i * m + j) * m..(i * m + j + 1) * m].copy_from_slice(&p);
                }
            }
            out.push(ProductComponent { weight: wc / 2.0, marginal });
        }
    }
    out
}

/// Row-stochastic pair transition on the grid, exact arc overlaps.
pub fn kuramoto_two_particle_kernel(model: &KuramotoModel, grid: &CircleGrid) -> Result<PairTransition> {
    PairTransition::product(grid.n_bins(), components(model, grid))
}

#[derive(Debug, Clone)]
pub struct KuramotoKernel {
    pub kernel: CollisionKernel,
    /// uniform on the bins
    pub pi: ProbabilityVector,
    pub factorization: FactorizationResidual,
    pub symmetry: SymmetryReport,
}

/// B = lambda P with lambda bin-averaged from the closed form.
pub fn build_kuramoto_collision_kernel(model: &KuramotoModel, grid: &CircleGrid) -> Result<KuramotoKernel> {
    let m = grid.n_bins();
    let by_steps: Vec<f64> = (0..=m / 2).map(|s| model.bin_averaged_lambda(grid, s)).collect();
    let rate: Vec<f64> = (0..m * m).map(|ij| by_steps[grid.bin_steps(ij / m, ij % m)]).collect();
    let raw = CollisionKernel::product_mixture(m, rate, components(model, grid))?;
    let kernel = symmetrize(&raw)?;
    let pi = ProbabilityVector::uniform(m);
    let factorization = factorization_residual(&kernel, &pi)?;
    let symmetry = check_symmetries(&kernel);
    Ok(KuramotoKernel { kernel, pi, factorization, symmetry })
}
