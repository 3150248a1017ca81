//! Opinion dynamics on [-1, 1]: two agents move toward each other by the
//! fraction D(v) = (1 - |v|) / 2 plus truncated Gaussian noise.

use super::grids::IntervalGrid;
use crate::boltzmann::{kernel_from_stationary, CollisionKernel, PairTransition};
use crate::error::{check_dim, Error, Result};
use crate::measures::{PositiveMeasure, ProbabilityVector};
use rayon::prelude::*;

/// How the noise scale delta enters the Gaussian factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseConvention {
    /// variance delta (1 - |v|)
    Variance,
    /// standard deviation delta (1 - |v|)
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModifierForm {
    /// 1 + amplitude exp(-beta s)
    Enhance { amplitude: f64 },
    /// exp(-beta s)
    Literal,
    /// exp(-beta / (s + eta))
    Inverse { eta: f64 },
}

/// How the two outgoing distances to (1, 0) and (0, 1) are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutgoingRule {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetricModifier {
    pub beta: f64,
    pub form: ModifierForm,
    pub rule: OutgoingRule,
}

impl AsymmetricModifier {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Invalid(format!("beta must be finite and nonnegative, got {beta}")));
        }
        Ok(Self { beta, form: ModifierForm::Enhance { amplitude: 50.0 }, rule: OutgoingRule::Min })
    }

    /// s = |v-1|^2 + |w-1|^2 + rule(|a-1|^2 + |b|^2, |b-1|^2 + |a|^2)
    pub fn distance(&self, v: f64, w: f64, a: f64, b: f64) -> f64 {
        let (x, y) = ((a - 1.0).powi(2) + b * b, (b - 1.0).powi(2) + a * a);
        let out = match self.rule {
            OutgoingRule::Min => x.min(y),
            OutgoingRule::Max => x.max(y),
        };
        (v - 1.0).powi(2) + (w - 1.0).powi(2) + out
    }

    pub fn factor(&self, s: f64) -> f64 {
        match self.form {
            ModifierForm::Enhance { amplitude } => 1.0 + amplitude * (-self.beta * s).exp(),
            ModifierForm::Literal => (-self.beta * s).exp(),
            ModifierForm::Inverse { eta } => (-self.beta / (s + eta)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionModel {
    pub delta: f64,
    pub noise: NoiseConvention,
    /// None for the symmetric model
    pub modifier: Option<AsymmetricModifier>,
    /// exponent turning the one-marginal of g into pi
    pub power: f64,
}

impl OpinionModel {
    pub fn symmetric(delta: f64) -> Result<Self> {
        let m = Self { delta, noise: NoiseConvention::Variance, modifier: None, power: 0.65 };
        m.validate()?;
        Ok(m)
    }

    pub fn asymmetric(delta: f64, beta: f64) -> Result<Self> {
        let m = Self { modifier: Some(AsymmetricModifier::new(beta)?), ..Self::symmetric(delta)? };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.power > 0.0 && self.power <= 2.0) {
            return Err(Error::Invalid(format!("power must lie in (0, 2], got {}", self.power)));
        }
        if let Some(m) = self.modifier {
            AsymmetricModifier::new(m.beta)?;
        }
        Ok(())
    }

    pub fn attraction(v: f64) -> f64 {
        (1.0 - v.abs()) / 2.0
    }

    pub fn noise_std(&self, v: f64) -> f64 {
        let s = 1.0 - v.abs();
        match self.noise {
            NoiseConvention::Variance => (self.delta * s).max(0.0).sqrt(),
            NoiseConvention::StdDev => self.delta * s,
        }
    }
}

/// Bin masses of N(mean, std^2) conditioned on [-1, 1]; a point mass when
/// std = 0.
pub fn truncated_gaussian_masses(grid: &IntervalGrid, mean: f64, std: f64) -> Vec<f64> {
    let m = grid.n_bins();
    let mut p = vec![0.0; m];
    if std <= 0.0 {
        p[grid.bin_of(mean)] = 1.0;
        return p;
    }
    let cdf = |x: f64| 0.5 * (1.0 + libm::erf((x - mean) / (std * std::f64::consts::SQRT_2)));
    let mut lo = cdf(-1.0);
    for (k, pk) in p.iter_mut().enumerate() {
        let hi = cdf(grid.edge(k + 1));
        *pk = (hi - lo).max(0.0);
        lo = hi;
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    } else {
        // the whole Gaussian lies beyond double precision of [-1, 1]
        p[grid.bin_of(mean)] = 1.0;
    }
    p
}

/// Symmetric-model transition on grid^2, averaged over which agent speaks
/// first so that it commutes with relabelling the agents.
pub fn opinion_transition(model: &OpinionModel, grid: &IntervalGrid) -> Result<PairTransition> {
    model.validate()?;
    let m = grid.n_bins();
    let c = grid.centers();
    let d = OpinionModel::attraction;
    let step = |own: f64, other: f64| truncated_gaussian_masses(grid, (1.0 - d(own)) * own + d(own) * other, model.noise_std(own));
    // first[(i, j)] = law of v' for (v, w) = (c_i, c_j); second is the same
    // map applied to (w, v')
    let table: Vec<Vec<f64>> = (0..m * m).into_par_iter().map(|ij| step(c[ij / m], c[ij % m])).collect();
    let m2 = m * m;
    let mut p = vec![0.0; m2 * m2];
    p.par_chunks_mut(m2).enumerate().for_each(|(ij, row)| {
        let (i, j) = (ij / m, ij % m);
        let f1 = &table[i * m + j];
        let g1 = &table[j * m + i];
        for k in 0..m {
            for l in 0..m {
                // v speaks first: v' ~ f1, then w' given v'; or w first
                let a = f1[k] * table[j * m + k][l];
                let b = g1[l] * table[i * m + l][k];
                row[k * m + l] = 0.5 * (a + b);
            }
        }
    });
    let p2 = PairTransition::dense(m, p)?;
    match &model.modifier {
        Some(md) => asymmetric_modifier(&p2, grid, md),
        None => Ok(p2),
    }
}

/// Multiplies each entry by the modifier factor and renormalizes rows.
pub fn asymmetric_modifier(p2: &PairTransition, grid: &IntervalGrid, md: &AsymmetricModifier) -> Result<PairTransition> {
    let m = p2.n_states();
    check_dim(grid.n_bins(), m)?;
    let c = grid.centers();
    let m2 = m * m;
    let mut out = vec![0.0; m2 * m2];
    out.par_chunks_mut(m2).enumerate().for_each(|(ij, row)| {
        let base = p2.row(ij);
        let (v, w) = (c[ij / m], c[ij % m]);
        for (kl, x) in row.iter_mut().enumerate() {
            *x = base[kl] * md.factor(md.distance(v, w, c[kl / m], c[kl % m]));
        }
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    });
    PairTransition::dense(m, out)
}

#[derive(Debug, Clone)]
pub struct OpinionEquilibrium {
    /// on grid^2, row-major (v, w)
    pub g: PositiveMeasure,
    /// max |g P - g|
    pub residual: f64,
    /// max |g(v, w) - g(w, v)|
    pub exchange_defect: f64,
}

pub fn solve_opinion_equilibrium(p2: &PairTransition) -> Result<OpinionEquilibrium> {
    let m = p2.n_states();
    let g = p2.stationary()?;
    let residual = p2.stationary_residual(g.weights());
    let w = g.weights();
    let mut exchange_defect: f64 = 0.0;
    for v in 0..m {
        for u in 0..m {
            exchange_defect = exchange_defect.max((w[v * m + u] - w[u * m + v]).abs());
        }
    }
    Ok(OpinionEquilibrium { g, residual, exchange_defect })
}

#[derive(Debug, Clone)]
pub struct PiLambda {
    pub pi: ProbabilityVector,
    /// g / (pi (x) pi), row-major
    pub lambda: Vec<f64>,
    /// Spearman correlation of lambda(v, w) with |v - w|
    pub rank_correlation: f64,
}

/// pi proportional to (one-marginal of g)^p, lambda = g / (pi (x) pi).
pub fn extract_pi_lambda(g: &PositiveMeasure, grid: &IntervalGrid, power: f64) -> Result<PiLambda> {
    let m = grid.n_bins();
    check_dim(m * m, g.len())?;
    if !(power > 0.0) {
        return Err(Error::Invalid(format!("power must be positive, got {power}")));
    }
    let w = g.weights();
    let marg: Vec<f64> = (0..m).map(|v| w[v * m..(v + 1) * m].iter().sum()).collect();
    let pi = ProbabilityVector::from_unnormalized(marg.iter().map(|x| x.powf(power)).collect())?;
    let p = pi.weights();
    let lambda: Vec<f64> = (0..m * m)
        .map(|i| {
            let d = p[i / m] * p[i % m];
            if d > 0.0 {
                w[i] / d
            } else {
                0.0
            }
        })
        .collect();
    let c = grid.centers();
    let dist: Vec<f64> = (0..m * m).map(|i| (c[i / m] - c[i % m]).abs()).collect();
    let rank_correlation = spearman(&dist, &lambda);
    Ok(PiLambda { pi, lambda, rank_correlation })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // ties share the average rank
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Strict local maxima, endpoints compared with their single neighbour.
pub fn local_maxima(w: &[f64]) -> Vec<usize> {
    (0..w.len())
        .filter(|&k| (k == 0 || w[k] > w[k - 1]) && (k + 1 == w.len() || w[k] > w[k + 1]))
        .collect()
}

/// pi mass of the bins whose centers lie in [-half_width, half_width].
pub fn central_mass(pi: &ProbabilityVector, grid: &IntervalGrid, half_width: f64) -> f64 {
    grid.centers()
        .iter()
        .zip(pi.weights())
        .filter(|(c, _)| c.abs() <= half_width)
        .map(|(_, w)| w)
        .sum()
}

/// Full pipeline: transition, equilibrium g, (pi, lambda), and the
/// collision kernel B = c g / (pi pi) P2.
#[derive(Debug, Clone)]
pub struct OpinionOutcome {
    pub transition: PairTransition,
    pub equilibrium: OpinionEquilibrium,
    pub pi_lambda: PiLambda,
}

pub fn run_opinion_model(model: &OpinionModel, grid: &IntervalGrid) -> Result<OpinionOutcome> {
    let transition = opinion_transition(model, grid)?;
    let equilibrium = solve_opinion_equilibrium(&transition)?;
    let pi_lambda = extract_pi_lambda(&equilibrium.g, grid, model.power)?;
    Ok(OpinionOutcome { transition, equilibrium, pi_lambda })
}

impl OpinionOutcome {
    pub fn collision_kernel(&self, c: f64) -> Result<CollisionKernel> {
        kernel_from_stationary(&self.transition, self.equilibrium.g.weights(), &self.pi_lambda.pi, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_gaussian() {
        let g = IntervalGrid::new(64).unwrap();
        let p = truncated_gaussian_masses(&g, 0.0, 0.01);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // mean 0 sits on the edge between bins 31 and 32
        assert!((p[31] - p[32]).abs() < 1e-15 && p[31] + p[32] > 0.998);
        assert_eq!(truncated_gaussian_masses(&g, 0.3, 0.0)[g.bin_of(0.3)], 1.0);
        let model = OpinionModel::symmetric(0.01).unwrap();
        assert_eq!(model.noise_std(1.0), 0.0);
    }

    #[test]
    fn transition_rows_and_symmetry() {
        let g = IntervalGrid::new(12).unwrap();
        let p = opinion_transition(&OpinionModel::symmetric(0.05).unwrap(), &g).unwrap();
        assert!(p.max_row_defect() < 1e-12);
        let m = 12;
        for vw in 0..m * m {
            let (r, s) = (p.row(vw), p.row((vw % m) * m + vw / m));
            for ab in 0..m * m {
                assert!((r[ab] - s[(ab % m) * m + ab / m]).abs() < 1e-15);
            }
        }
        let eq = solve_opinion_equilibrium(&p).unwrap();
        assert!(eq.residual < 1e-10 && eq.exchange_defect < 1e-12);
    }

    #[test]
    fn modifier_identity_and_enhancement() {
        let g = IntervalGrid::new(12).unwrap();
        let model = OpinionModel::symmetric(0.05).unwrap();
        let p = opinion_transition(&model, &g).unwrap();
        let same = asymmetric_modifier(&p, &g, &AsymmetricModifier::new(0.0).unwrap()).unwrap();
        for i in 0..144 {
            assert!(same.row(i).iter().zip(p.row(i)).all(|(a, b)| (a - b).abs() < 1e-15));
        }
        let md = AsymmetricModifier::new(5.0).unwrap();
        let q = asymmetric_modifier(&p, &g, &md).unwrap();
        assert!(q.max_row_defect() < 1e-12);
        // from a uniform row, (1, 0) and (0, 1) gain over (0, 0)
        let flat = PairTransition::dense(12, vec![1.0 / 144.0; 144 * 144]).unwrap();
        let q = asymmetric_modifier(&flat, &g, &md).unwrap();
        let (top, zero) = (11, g.bin_of(0.01));
        let row = q.row(top * 12 + top);
        assert!(row[top * 12 + zero] > 10.0 * row[zero * 12 + zero]);
        assert!((row[top * 12 + zero] - row[zero * 12 + top]).abs() < 1e-15);
    }

    #[test]
    fn product_measure_gives_constant_lambda() {
        let g = IntervalGrid::new(4).unwrap();
        let mu = [0.1, 0.2, 0.3, 0.4];
        let gm = PositiveMeasure::new((0..16).map(|i| mu[i / 4] * mu[i % 4]).collect()).unwrap();
        let out = extract_pi_lambda(&gm, &g, 1.0).unwrap();
        for (a, b) in out.pi.weights().iter().zip(mu) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(out.lambda.iter().all(|l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn doubly_stochastic_gives_uniform_g() {
        let m = 3;
        let p: Vec<f64> = (0..81).map(|i| if i / 9 == i % 9 { 0.2 } else { 0.1 }).collect();
        let p2 = PairTransition::dense(m, p).unwrap();
        let eq = solve_opinion_equilibrium(&p2).unwrap();
        assert!(eq.g.weights().iter().all(|x| (x - 1.0 / 9.0).abs() < 1e-14));
    }

    #[test]
    fn spearman_and_maxima() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]) - 0.9486832980505138).abs() < 1e-12);
        assert_eq!(local_maxima(&[1.0, 3.0, 2.0, 2.5, 4.0]), vec![1, 4]);
    }
}
