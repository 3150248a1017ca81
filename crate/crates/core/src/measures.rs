//! Probability vectors, finite positive measures and the two relative
//! entropies built on them.
//!
//! Infinite values are represented by `f64::INFINITY`; they are legitimate
//! results, not errors.

use crate::error::{check_dim, Error, Result};
use serde::{Deserialize, Serialize};

/// Weights at or below this are treated as exact zeros before logarithms.
pub const ZERO_FLOOR: f64 = 1e-300;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates nonnegativity and unit mass (within 1e-12).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("empty probability vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite weight {w}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::Invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Divides by the total. Fails on a zero or non-finite total.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid("negative or non-finite weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::Invalid("zero total mass".into()));
        }
        for w in &mut weights {
            *w /= s;
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, k: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[k] = 1.0;
        Self { weights }
    }

    pub fn n_states(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Density with respect to `reference`, entrywise `self / reference`.
    /// Entries where the reference vanishes are set to zero.
    pub fn density(&self, reference: &ProbabilityVector) -> Result<Vec<f64>> {
        check_dim(self.n_states(), reference.n_states())?;
        Ok(self
            .weights
            .iter()
            .zip(&reference.weights)
            .map(|(p, q)| if *q > ZERO_FLOOR { p / q } else { 0.0 })
            .collect())
    }

    /// Entries below `floor` are zeroed and the rest renormalized.
    pub fn clamped(&self, floor: f64) -> Self {
        let w: Vec<f64> = self
            .weights
            .iter()
            .map(|x| if *x < floor { 0.0 } else { *x })
            .collect();
        Self::from_unnormalized(w).unwrap_or_else(|_| self.clone())
    }

    pub fn total_variation(&self, other: &ProbabilityVector) -> Result<f64> {
        check_dim(self.n_states(), other.n_states())?;
        Ok(0.5
            * self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn sup_distance(&self, other: &ProbabilityVector) -> Result<f64> {
        check_dim(self.n_states(), other.n_states())?;
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Product measure on the pair space, row-major in (v, w).
    pub fn tensor(&self, other: &ProbabilityVector) -> PositiveMeasure {
        let mut w = Vec::with_capacity(self.n_states() * other.n_states());
        for a in &self.weights {
            for b in &other.weights {
                w.push(a * b);
            }
        }
        PositiveMeasure::from_weights_unchecked(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveMeasure {
    weights: Vec<f64>,
    total_mass: f64,
}

impl PositiveMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite weight {w}")));
        }
        Ok(Self::from_weights_unchecked(weights))
    }

    pub(crate) fn from_weights_unchecked(weights: Vec<f64>) -> Self {
        let total_mass = weights.iter().sum();
        Self { weights, total_mass }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn normalized(&self) -> Result<ProbabilityVector> {
        ProbabilityVector::from_unnormalized(self.weights.clone())
    }
}

#[inline]
fn is_zero(x: f64) -> bool {
    x <= ZERO_FLOOR
}

/// Ent(mu | nu) = sum mu log(mu / nu), `+inf` on a support violation.
pub fn relative_entropy(mu: &ProbabilityVector, nu: &ProbabilityVector) -> Result<f64> {
    check_dim(mu.n_states(), nu.n_states())?;
    Ok(relative_entropy_slices(mu.weights(), nu.weights()))
}

pub(crate) fn relative_entropy_slices(mu: &[f64], nu: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&m, &n) in mu.iter().zip(nu) {
        if is_zero(m) {
            continue;
        }
        if is_zero(n) {
            return f64::INFINITY;
        }
        s += m * (m / n).ln();
    }
    s.max(0.0)
}

/// E(V | W) = sum V log(V / W) - V + W, `+inf` when V charges a W-null cell.
pub fn relative_entropy_positive(v: &PositiveMeasure, w: &PositiveMeasure) -> Result<f64> {
    check_dim(v.len(), w.len())?;
    Ok(positive_entropy_slices(v.weights(), w.weights()))
}

/// Cellwise contribution of E(V | W).
#[inline]
pub(crate) fn positive_entropy_cell(v: f64, w: f64) -> f64 {
    if is_zero(v) {
        return w.max(0.0);
    }
    if is_zero(w) {
        return f64::INFINITY;
    }
    let c = v * (v / w).ln() - v + w;
    c.max(0.0)
}

pub(crate) fn positive_entropy_slices(v: &[f64], w: &[f64]) -> f64 {
    v.iter()
        .zip(w)
        .map(|(a, b)| positive_entropy_cell(*a, *b))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(w.to_vec()).unwrap()
    }

    fn arb_pv(n: usize) -> impl Strategy<Value = ProbabilityVector> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |w| {
            ProbabilityVector::from_unnormalized(w).ok()
        })
    }

    fn arb_positive_pv(n: usize) -> impl Strategy<Value = ProbabilityVector> {
        prop::collection::vec(0.01f64..1.0, n)
            .prop_map(|w| ProbabilityVector::from_unnormalized(w).unwrap())
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(PositiveMeasure::new(vec![1.0, -1e-3]).is_err());
    }

    #[test]
    fn entropy_examples() {
        let m = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(relative_entropy(&m, &m).unwrap(), 0.0);
        let e = relative_entropy(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert_relative_eq!(e, 2f64.ln(), epsilon = 1e-15);
        let e = relative_entropy(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap();
        assert!(e.is_infinite() && e > 0.0);
        assert!(relative_entropy(&pv(&[1.0]), &pv(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn positive_entropy_examples() {
        let w = PositiveMeasure::new(vec![0.25, 0.25, 0.5]).unwrap();
        let v2 = PositiveMeasure::new(w.weights().iter().map(|x| 2.0 * x).collect()).unwrap();
        assert_eq!(relative_entropy_positive(&w, &w).unwrap(), 0.0);
        let e = relative_entropy_positive(&v2, &w).unwrap();
        assert_relative_eq!(e, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-14);
        let z = PositiveMeasure::new(vec![0.0, 1.0, 1.0]).unwrap();
        let v = PositiveMeasure::new(vec![1e-3, 1.0, 1.0]).unwrap();
        assert!(relative_entropy_positive(&v, &z).unwrap().is_infinite());
        // the reverse direction is finite: V-null cells contribute W
        assert_relative_eq!(relative_entropy_positive(&z, &v).unwrap(), 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn tiny_weights_are_zero() {
        let mu = pv(&[1.0, 0.0]);
        let nu = ProbabilityVector::from_unnormalized(vec![1.0, 1e-310]).unwrap();
        assert_eq!(relative_entropy(&mu, &nu).unwrap(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn nonnegative(mu in arb_pv(5), nu in arb_pv(5)) {
            prop_assert!(relative_entropy(&mu, &nu).unwrap() >= 0.0);
            let v = PositiveMeasure::new(mu.weights().iter().map(|x| 3.0 * x).collect()).unwrap();
            let w = PositiveMeasure::new(nu.weights().to_vec()).unwrap();
            prop_assert!(relative_entropy_positive(&v, &w).unwrap() >= 0.0);
        }

        #[test]
        fn positive_when_distinct(mu in arb_positive_pv(4), nu in arb_positive_pv(4)) {
            if mu.sup_distance(&nu).unwrap() > 1e-6 {
                prop_assert!(relative_entropy(&mu, &nu).unwrap() > 0.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn jointly_convex(
            m1 in arb_positive_pv(4), m2 in arb_positive_pv(4),
            n1 in arb_positive_pv(4), n2 in arb_positive_pv(4),
        ) {
            for t in [0.25, 0.5, 0.75] {
                let mix = |a: &ProbabilityVector, b: &ProbabilityVector| {
                    ProbabilityVector::from_unnormalized(
                        a.weights().iter().zip(b.weights()).map(|(x, y)| t * x + (1.0 - t) * y).collect(),
                    ).unwrap()
                };
                let lhs = relative_entropy(&mix(&m1, &m2), &mix(&n1, &n2)).unwrap();
                let rhs = t * relative_entropy(&m1, &n1).unwrap()
                    + (1.0 - t) * relative_entropy(&m2, &n2).unwrap();
                prop_assert!(lhs <= rhs + 1e-10);
            }
        }

        #[test]
        fn variational_bound(
            mu in arb_pv(6), nu in arb_positive_pv(6),
            phi in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let mean: f64 = mu.weights().iter().zip(&phi).map(|(m, f)| m * f).sum();
            let log_mgf = nu.weights().iter().zip(&phi).map(|(n, f)| n * f.exp()).sum::<f64>().ln();
            prop_assert!(mean - log_mgf <= relative_entropy(&mu, &nu).unwrap() + 1e-10);
        }
    }
}
