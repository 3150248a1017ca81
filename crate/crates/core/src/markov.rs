//! Finite-state continuous-time Markov chains, their measure-flux pairs and
//! the associated entropy balance.
//!
//! Fluxes are stored as one density per time cell. The density on cell
//! `[t_k, t_{k+1}]` is evaluated at the cell-average state
//! `(P_k + P_{k+1}) / 2`, and every time integral is a sum of cell values
//! times the cell length.

use crate::error::{check_dim, Error, Result};
use crate::integrate;
use crate::linalg;
use crate::measures::{positive_entropy_cell, relative_entropy, ProbabilityVector};
use crate::report::{assemble, EntropyReport, RawTerms, Verdict};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Entries below this are clamped to zero before entropies are evaluated.
pub const CLAMP_FLOOR: f64 = 1e-14;
const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    n: usize,
    rates: Vec<f64>,
}

impl RateMatrix {
    /// Row-major `n * n` rates; the diagonal is ignored.
    pub fn new(n: usize, mut rates: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("rate matrix needs at least one state".into()));
        }
        check_dim(n * n, rates.len())?;
        for x in 0..n {
            rates[x * n + x] = 0.0;
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::Invalid(format!("rate {r} is not a finite nonnegative number")));
        }
        Ok(Self { n, rates })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut rates = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    rates[x * n + y] = f(x, y);
                }
            }
        }
        Self::new(n, rates)
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[x * self.n + y]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// lambda(x) = sum_y r(x, y)
    pub fn scattering_rate(&self, x: usize) -> f64 {
        self.rates[x * self.n..(x + 1) * self.n].iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, rates: self.rates.iter().map(|r| r * c).collect() }
    }

    /// sigma(x, y) = r(x, y) / pi(y)
    pub fn sigma(&self, pi: &ProbabilityVector) -> Result<Vec<f64>> {
        check_dim(self.n, pi.n_states())?;
        let p = pi.weights();
        Ok((0..self.n * self.n).map(|i| self.rates[i] / p[i % self.n]).collect())
    }

    pub fn is_reversible(&self, pi: &ProbabilityVector, tol: f64) -> bool {
        let p = pi.weights();
        (0..self.n).all(|x| (0..self.n).all(|y| (self.rate(x, y) * p[x] - self.rate(y, x) * p[y]).abs() <= tol))
    }

    /// out(y) = sum_x p(x) r(x, y) - p(y) lambda(y)
    pub fn forward_rhs(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..n {
            let px = p[x];
            if px == 0.0 {
                continue;
            }
            let row = &self.rates[x * n..(x + 1) * n];
            let mut lam = 0.0;
            for y in 0..n {
                out[y] += px * row[y];
                lam += row[y];
            }
            out[x] -= px * lam;
        }
    }

    pub fn communicating_classes(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        linalg::communicating_classes(
            n,
            (0..n * n).filter(|i| self.rates[*i] > 0.0).map(|i| (i / n, i % n)),
        )
    }
}

/// Law of the process on a time grid, with one representative state per
/// cell (the exact time average when produced by an integrator, the average
/// of the two endpoints otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTrajectory {
    t_grid: Vec<f64>,
    states: Vec<ProbabilityVector>,
    cell_means: Vec<Vec<f64>>,
    pair_means: Option<Vec<Vec<f64>>>,
}

impl MarkovTrajectory {
    pub fn new(t_grid: Vec<f64>, states: Vec<ProbabilityVector>) -> Result<Self> {
        validate_grid(&t_grid)?;
        check_dim(t_grid.len(), states.len())?;
        let n = states[0].n_states();
        for s in &states {
            check_dim(n, s.n_states())?;
        }
        let cell_means = states
            .windows(2)
            .map(|w| w[0].weights().iter().zip(w[1].weights()).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        Ok(Self { t_grid, states, cell_means, pair_means: None })
    }

    pub(crate) fn from_run(t_grid: Vec<f64>, run: integrate::SimplexRun) -> Result<Self> {
        let states = run
            .states
            .into_iter()
            .map(ProbabilityVector::from_unnormalized)
            .collect::<Result<Vec<_>>>()?;
        let mut traj = Self::new(t_grid, states)?;
        traj.cell_means = run.cell_means;
        traj.pair_means = run.pair_means;
        Ok(traj)
    }

    /// Time average of P (x) P over cell k, if tracked.
    pub fn pair_mean(&self, k: usize) -> Option<&[f64]> {
        self.pair_means.as_ref().map(|p| p[k].as_slice())
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn states(&self) -> &[ProbabilityVector] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states[0].n_states()
    }

    pub fn n_cells(&self) -> usize {
        self.t_grid.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.t_grid[k + 1] - self.t_grid[k]
    }

    pub fn first(&self) -> &ProbabilityVector {
        &self.states[0]
    }

    pub fn last(&self) -> &ProbabilityVector {
        self.states.last().unwrap()
    }

    /// Representative state of cell k.
    pub fn cell_state(&self, k: usize) -> &[f64] {
        &self.cell_means[k]
    }
}

pub(crate) fn validate_grid(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Err(Error::Invalid("time grid needs at least two points".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// A nonnegative density on X x X per time cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovFluxPath {
    t_grid: Vec<f64>,
    n: usize,
    q: Vec<Vec<f64>>,
}

impl MarkovFluxPath {
    pub fn new(t_grid: Vec<f64>, n: usize, q: Vec<Vec<f64>>) -> Result<Self> {
        validate_grid(&t_grid)?;
        check_dim(t_grid.len() - 1, q.len())?;
        for c in &q {
            check_dim(n * n, c.len())?;
            if c.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Invalid("flux densities must be nonnegative".into()));
            }
        }
        Ok(Self { t_grid, n, q })
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn n_cells(&self) -> usize {
        self.q.len()
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        &self.q[k]
    }

    /// Total mass per unit time of cell k.
    pub fn cell_mass(&self, k: usize) -> f64 {
        self.q[k].iter().sum()
    }

    /// Adds `scale * (q + q^T) / 2`, a divergence-free perturbation.
    pub fn with_symmetric_component(&self, scale: f64) -> Self {
        let n = self.n;
        let q = self
            .q
            .iter()
            .map(|c| {
                (0..n * n)
                    .map(|i| {
                        let (x, y) = (i / n, i % n);
                        c[i] + scale * 0.5 * (c[x * n + y] + c[y * n + x])
                    })
                    .collect()
            })
            .collect();
        Self { t_grid: self.t_grid.clone(), n, q }
    }

    /// Adds an arbitrary symmetric nonnegative density per cell.
    pub fn plus_symmetric(&self, s: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let n = self.n;
        let mut out = self.clone();
        for (k, c) in out.q.iter_mut().enumerate() {
            for x in 0..n {
                for y in 0..n {
                    let v = 0.5 * (s(k, x, y) + s(k, y, x));
                    if !(v >= 0.0) {
                        return Err(Error::Invalid("symmetric component must be nonnegative".into()));
                    }
                    c[x * n + y] += v;
                }
            }
        }
        Ok(out)
    }
}

/// Max over y of |sum_x pi(x) r(x, y) - pi(y) lambda(y)|.
pub fn stationarity_residual(r: &RateMatrix, pi: &ProbabilityVector) -> Result<f64> {
    check_dim(r.n_states(), pi.n_states())?;
    let mut out = vec![0.0; r.n_states()];
    r.forward_rhs(pi.weights(), &mut out);
    Ok(out.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

pub fn stationary_measure(r: &RateMatrix) -> Result<ProbabilityVector> {
    let n = r.n_states();
    if n == 1 {
        return Ok(ProbabilityVector::uniform(1));
    }
    let classes = r.communicating_classes();
    if classes.len() > 1 {
        return Err(Error::Reducible { classes });
    }
    let lam_max = (0..n).map(|x| r.scattering_rate(x)).fold(0.0, f64::max);
    let mut w = if n <= DENSE_LIMIT {
        let mut a = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                a[(y, x)] += r.rate(x, y);
            }
            a[(x, x)] -= r.scattering_rate(x);
        }
        linalg::null_vector_dense(a)?
    } else {
        // uniformized transition matrix T = I + L / Lambda
        let big = lam_max * 1.05;
        let apply = |p: &[f64], out: &mut [f64]| {
            r.forward_rhs(p, out);
            for i in 0..n {
                out[i] = p[i] + out[i] / big;
            }
        };
        match linalg::stationary_gmres(n, apply, 1e-13, 100, 20_000) {
            Ok((g, _)) => g,
            Err(_) => linalg::stationary_power(n, apply, 1e-15, 10_000_000)?.0,
        }
    };
    let mut pi = ProbabilityVector::from_unnormalized(std::mem::take(&mut w))?;
    let scale = lam_max.max(1.0);
    let mut res = stationarity_residual(r, &pi)?;
    if res > 1e-13 * scale {
        // one round of Richardson polishing on the uniformized chain
        let big = lam_max * 1.05;
        let mut out = vec![0.0; n];
        for _ in 0..50 {
            r.forward_rhs(pi.weights(), &mut out);
            let p: Vec<f64> = pi.weights().iter().zip(&out).map(|(a, b)| (a + b / big).max(0.0)).collect();
            pi = ProbabilityVector::from_unnormalized(p)?;
            res = stationarity_residual(r, &pi)?;
            if res <= 1e-13 * scale {
                break;
            }
        }
    }
    if res > 1e-12 * scale {
        return Err(Error::NoConvergence { iterations: 0, residual: res });
    }
    Ok(pi)
}

fn require_stationary(r: &RateMatrix, pi: &ProbabilityVector) -> Result<()> {
    check_dim(r.n_states(), pi.n_states())?;
    if pi.min_weight() <= 0.0 {
        return Err(Error::Invalid("pi must be strictly positive".into()));
    }
    let res = stationarity_residual(r, pi)?;
    let scale = (0..r.n_states()).map(|x| r.scattering_rate(x)).fold(1.0, f64::max);
    if res > 1e-10 * scale {
        return Err(Error::NotStationary { residual: res });
    }
    Ok(())
}

/// r_hat(y, x) = r(x, y) pi(x) / pi(y)
pub fn reversed_rates(r: &RateMatrix, pi: &ProbabilityVector) -> Result<RateMatrix> {
    require_stationary(r, pi)?;
    let p = pi.weights();
    RateMatrix::from_fn(r.n_states(), |y, x| r.rate(x, y) * p[x] / p[y])
}

pub fn kolmogorov_evolve(r: &RateMatrix, p0: &ProbabilityVector, t_end: f64, n_steps: usize) -> Result<MarkovTrajectory> {
    check_dim(r.n_states(), p0.n_states())?;
    let grid = integrate::uniform_grid(t_end, n_steps)?;
    evolve_on_grid(r, p0, grid)
}

pub fn evolve_on_grid(r: &RateMatrix, p0: &ProbabilityVector, grid: Vec<f64>) -> Result<MarkovTrajectory> {
    validate_grid(&grid)?;
    let run = integrate::integrate_on_simplex(|p, out| r.forward_rhs(p, out), p0.weights(), &grid, false)?;
    MarkovTrajectory::from_run(grid, run)
}

fn flux_from(traj: &MarkovTrajectory, n: usize, cell: impl Fn(&[f64], usize, usize) -> f64) -> Result<MarkovFluxPath> {
    let q = (0..traj.n_cells())
        .map(|k| {
            let p = traj.cell_state(k);
            (0..n * n).map(|i| if i / n == i % n { 0.0 } else { cell(p, i / n, i % n) }).collect()
        })
        .collect();
    MarkovFluxPath::new(traj.t_grid().to_vec(), n, q)
}

/// q(x, y) = r(x, y) P(x)
pub fn typical_flux(r: &RateMatrix, traj: &MarkovTrajectory) -> Result<MarkovFluxPath> {
    check_dim(r.n_states(), traj.n_states())?;
    flux_from(traj, r.n_states(), |p, x, y| r.rate(x, y) * p[x])
}

/// q_hat(x, y) = r_hat(x, y) P(x)
pub fn reversed_flux(r: &RateMatrix, pi: &ProbabilityVector, traj: &MarkovTrajectory) -> Result<MarkovFluxPath> {
    check_dim(r.n_states(), traj.n_states())?;
    let rh = reversed_rates(r, pi)?;
    flux_from(traj, r.n_states(), |p, x, y| rh.rate(x, y) * p[x])
}

/// Exchanges the two state indices in every cell.
pub fn swap_map(flux: &MarkovFluxPath) -> MarkovFluxPath {
    let n = flux.n;
    let q = flux
        .q
        .iter()
        .map(|c| (0..n * n).map(|i| c[(i % n) * n + i / n]).collect())
        .collect();
    MarkovFluxPath { t_grid: flux.t_grid.clone(), n, q }
}

/// q(x, y) = r(x, y) pi(x) sqrt(f(x) f(y))
pub fn geometric_mean_flux(r: &RateMatrix, pi: &ProbabilityVector, traj: &MarkovTrajectory) -> Result<MarkovFluxPath> {
    check_dim(r.n_states(), traj.n_states())?;
    check_dim(r.n_states(), pi.n_states())?;
    let w = pi.weights();
    flux_from(traj, r.n_states(), |p, x, y| {
        r.rate(x, y) * w[x] * ((p[x] / w[x]) * (p[y] / w[y])).sqrt()
    })
}

/// Max over cells and states of |Delta P(y) - dt sum_x (q(x, y) - q(y, x))|.
pub fn continuity_residual(traj: &MarkovTrajectory, flux: &MarkovFluxPath) -> Result<f64> {
    check_dim(traj.n_states(), flux.n)?;
    check_dim(traj.n_cells(), flux.n_cells())?;
    let n = flux.n;
    let mut worst: f64 = 0.0;
    for k in 0..traj.n_cells() {
        let dt = traj.dt(k);
        let (a, b) = (traj.states[k].weights(), traj.states[k + 1].weights());
        let c = &flux.q[k];
        for y in 0..n {
            let net: f64 = (0..n).map(|x| c[x * n + y] - c[y * n + x]).sum();
            worst = worst.max((b[y] - a[y] - dt * net).abs());
        }
    }
    Ok(worst)
}

/// sum sigma(x, y) pi(x) pi(y) (sqrt f(x) - sqrt f(y))^2
pub fn dirichlet_form(r: &RateMatrix, pi: &ProbabilityVector, p: &ProbabilityVector) -> Result<f64> {
    check_dim(r.n_states(), pi.n_states())?;
    check_dim(r.n_states(), p.n_states())?;
    Ok(dirichlet_slice(r, pi.weights(), p.weights()))
}

fn dirichlet_slice(r: &RateMatrix, pi: &[f64], p: &[f64]) -> f64 {
    let n = r.n_states();
    let sf: Vec<f64> = p.iter().zip(pi).map(|(a, b)| (a / b).sqrt()).collect();
    let mut s = 0.0;
    for x in 0..n {
        for y in 0..n {
            let d = sf[x] - sf[y];
            s += r.rate(x, y) * pi[x] * d * d;
        }
    }
    s
}

/// All terms of the entropy balance along (traj, flux) against (r, pi).
pub fn entropy_balance_report(
    r: &RateMatrix,
    pi: &ProbabilityVector,
    traj: &MarkovTrajectory,
    flux: &MarkovFluxPath,
) -> Result<EntropyReport> {
    require_stationary(r, pi)?;
    check_dim(r.n_states(), traj.n_states())?;
    check_dim(traj.n_cells(), flux.n_cells())?;
    check_dim(r.n_states(), flux.n)?;
    let n = r.n_states();
    let w = pi.weights();
    let continuity = continuity_residual(traj, flux)?;
    let ent_0 = relative_entropy(&traj.first().clamped(CLAMP_FLOOR), pi)?;
    let ent_t = relative_entropy(&traj.last().clamped(CLAMP_FLOOR), pi)?;
    let mut shrunk = traj.states.iter().any(|s| s.weights().iter().any(|v| *v < CLAMP_FLOOR));
    let (mut e_f, mut e_r, mut e_g, mut dir) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..traj.n_cells() {
        let dt = traj.dt(k);
        let p = clamp_slice(traj.cell_state(k));
        shrunk |= p.iter().any(|v| *v == 0.0);
        let f: Vec<f64> = p.iter().zip(w).map(|(a, b)| a / b).collect();
        let c = &flux.q[k];
        let (mut cf, mut cr, mut cg) = (0.0, 0.0, 0.0);
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    continue;
                }
                let v = c[x * n + y];
                let base = r.rate(x, y) * w[x];
                cf += positive_entropy_cell(v, base * f[x]);
                cr += positive_entropy_cell(v, base * f[y]);
                cg += positive_entropy_cell(v, base * (f[x] * f[y]).sqrt());
            }
        }
        e_f += dt * cf;
        e_r += dt * cr;
        e_g += dt * cg;
        dir += dt * dirichlet_slice(r, w, &p);
    }
    Ok(assemble(
        "markov",
        RawTerms {
            ent_t,
            ent_0,
            e_forward: e_f,
            e_reversed: e_r,
            e_r: e_g,
            dirichlet: dir,
            continuity,
            support_shrunk: shrunk,
        },
        false,
    ))
}

pub(crate) fn clamp_slice(p: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = p.iter().map(|x| if *x < CLAMP_FLOOR { 0.0 } else { *x }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

#[derive(Debug, Clone)]
pub struct VariationalCheck {
    pub verdict: Verdict,
    /// Ent(P_T) + E(V | swapped reversed flux) - Ent(P_0)
    pub gap: f64,
    /// Ent(P_T) + 2 E(V | R^P) + int D - Ent(P_0)
    pub gap_second_form: f64,
    /// |E(V|V^P) + E(V|swap rev) - 2 E(V|R^P) - int D|, when all terms are finite.
    pub decomposition_residual: Option<f64>,
    pub report: EntropyReport,
}

impl VariationalCheck {
    pub(crate) fn from_report(report: EntropyReport) -> Self {
        Self {
            verdict: report.verdict,
            gap: report.gap.map(|g| g.0).unwrap_or(f64::NAN),
            gap_second_form: report.gap_second_form.map(|g| g.0).unwrap_or(f64::NAN),
            decomposition_residual: report.decomposition_residual(),
            report,
        }
    }
}

pub fn variational_check(
    r: &RateMatrix,
    pi: &ProbabilityVector,
    traj: &MarkovTrajectory,
    flux: &MarkovFluxPath,
) -> Result<VariationalCheck> {
    Ok(VariationalCheck::from_report(entropy_balance_report(r, pi, traj, flux)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state() -> RateMatrix {
        RateMatrix::new(2, vec![0.0, 1.0, 3.0, 0.0]).unwrap()
    }

    fn cycle() -> RateMatrix {
        RateMatrix::from_fn(3, |x, y| if y == (x + 1) % 3 { 1.0 } else { 0.0 }).unwrap()
    }

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_measure(&two_state()).unwrap();
        assert_relative_eq!(pi.weights()[0], 0.75, epsilon = 1e-14);
        let sym = RateMatrix::from_fn(4, |x, y| 1.0 + (x + y) as f64).unwrap();
        let pi = stationary_measure(&sym).unwrap();
        assert!(pi.sup_distance(&ProbabilityVector::uniform(4)).unwrap() < 1e-14);
        let pi = stationary_measure(&cycle()).unwrap();
        assert!(pi.sup_distance(&ProbabilityVector::uniform(3)).unwrap() < 1e-14);
    }

    #[test]
    fn reducible_chain_reports_classes() {
        let r = RateMatrix::new(3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        match stationary_measure(&r) {
            Err(Error::Reducible { classes }) => assert_eq!(classes, vec![vec![0, 1], vec![2]]),
            other => panic!("expected reducible error, got {other:?}"),
        }
    }

    #[test]
    fn reversal() {
        let c = cycle();
        let pi = ProbabilityVector::uniform(3);
        let rh = reversed_rates(&c, &pi).unwrap();
        assert_eq!(rh.rate(1, 0), 1.0);
        assert_eq!(rh.rate(2, 1), 1.0);
        assert_eq!(rh.rate(0, 2), 1.0);
        assert_eq!(rh.rate(0, 1), 0.0);
        let twice = reversed_rates(&rh, &pi).unwrap();
        assert_eq!(twice, c);
        let r = two_state();
        let pi = stationary_measure(&r).unwrap();
        assert!(reversed_rates(&r, &pi).unwrap().rates().iter().zip(r.rates()).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(matches!(reversed_rates(&r, &pv(&[0.5, 0.5])), Err(Error::NotStationary { .. })));
        assert!(reversed_rates(&c, &pv(&[0.0, 0.5, 0.5])).is_err());
    }

    #[test]
    fn two_state_closed_form() {
        let r = two_state();
        let traj = kolmogorov_evolve(&r, &pv(&[0.1, 0.9]), 2.0, 40).unwrap();
        for (t, p) in traj.t_grid().iter().zip(traj.states()) {
            let exact = 0.75 + (0.1 - 0.75) * (-4.0 * t).exp();
            assert!((p.weights()[0] - exact).abs() < 1e-9);
        }
        let pi = stationary_measure(&r).unwrap();
        let still = kolmogorov_evolve(&r, &pi, 3.0, 10).unwrap();
        assert!(still.states().iter().all(|p| p.sup_distance(&pi).unwrap() < 1e-10));
    }

    #[test]
    fn flux_examples() {
        let r = two_state();
        let traj = MarkovTrajectory::new(vec![0.0, 1.0], vec![pv(&[1.0, 0.0]), pv(&[1.0, 0.0])]).unwrap();
        let q = typical_flux(&r, &traj).unwrap();
        assert_eq!(q.cell(0), &[0.0, 1.0, 0.0, 0.0]);
        let s = swap_map(&q);
        assert_eq!(s.cell(0), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(swap_map(&s), q);
    }

    #[test]
    fn mass_identity_of_reversed_flux() {
        let r = RateMatrix::from_fn(4, |x, y| 0.3 + ((3 * x + 5 * y) % 7) as f64 * 0.4).unwrap();
        let pi = stationary_measure(&r).unwrap();
        let traj = kolmogorov_evolve(&r, &pv(&[0.7, 0.1, 0.1, 0.1]), 1.0, 8).unwrap();
        let q = typical_flux(&r, &traj).unwrap();
        let qh = reversed_flux(&r, &pi, &traj).unwrap();
        for k in 0..q.n_cells() {
            let p = traj.cell_state(k);
            let lam: f64 = (0..4).map(|x| p[x] * r.scattering_rate(x)).sum();
            assert_relative_eq!(q.cell_mass(k), lam, epsilon = 1e-13);
            assert_relative_eq!(q.cell_mass(k), qh.cell_mass(k), epsilon = 1e-13);
        }
    }

    #[test]
    fn cycle_reversed_flux_at_pi() {
        let c = cycle();
        let pi = ProbabilityVector::uniform(3);
        let traj = MarkovTrajectory::new(vec![0.0, 1.0], vec![pi.clone(), pi.clone()]).unwrap();
        let qh = reversed_flux(&c, &pi, &traj).unwrap();
        let rh = reversed_rates(&c, &pi).unwrap();
        assert_eq!(qh, typical_flux(&rh, &traj).unwrap());
    }

    #[test]
    fn dirichlet_examples() {
        let r = two_state();
        let pi = stationary_measure(&r).unwrap();
        // f = (4/3, 0): r(1,2) pi(1) f(1) + r(2,1) pi(2) f(1) = 1 + 1
        assert_relative_eq!(dirichlet_form(&r, &pi, &pv(&[1.0, 0.0])).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(dirichlet_form(&r, &pi, &pi).unwrap(), 0.0);
        let p = pv(&[0.3, 0.7]);
        assert_relative_eq!(
            dirichlet_form(&r.scaled(2.0), &pi, &p).unwrap(),
            2.0 * dirichlet_form(&r, &pi, &p).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn continuity_examples() {
        let r = two_state();
        let traj = kolmogorov_evolve(&r, &pv(&[0.1, 0.9]), 1.0, 200).unwrap();
        let q = typical_flux(&r, &traj).unwrap();
        assert!(continuity_residual(&traj, &q).unwrap() < 1e-8);
        let doubled = MarkovFluxPath::new(
            q.t_grid().to_vec(),
            2,
            (0..q.n_cells()).map(|k| q.cell(k).iter().map(|v| 2.0 * v).collect()).collect(),
        )
        .unwrap();
        assert!(continuity_residual(&traj, &doubled).unwrap() > 1e-4);
        let c = cycle();
        let pi = ProbabilityVector::uniform(3);
        let flat = MarkovTrajectory::new(vec![0.0, 0.5, 1.0], vec![pi.clone(), pi.clone(), pi.clone()]).unwrap();
        let q = typical_flux(&c, &flat).unwrap().with_symmetric_component(3.0);
        assert!(continuity_residual(&flat, &q).unwrap() < 1e-16);
    }

    #[test]
    fn geometric_mean_is_pointwise_mean() {
        let r = RateMatrix::from_fn(3, |x, y| 1.0 + (2 * x + y) as f64 * 0.5).unwrap();
        let pi = stationary_measure(&r).unwrap();
        let traj = kolmogorov_evolve(&r, &pv(&[0.6, 0.3, 0.1]), 0.5, 4).unwrap();
        let g = geometric_mean_flux(&r, &pi, &traj).unwrap();
        let v = typical_flux(&r, &traj).unwrap();
        let u = swap_map(&reversed_flux(&r, &pi, &traj).unwrap());
        for k in 0..4 {
            for i in 0..9 {
                assert_relative_eq!(g.cell(k)[i], (v.cell(k)[i] * u.cell(k)[i]).sqrt(), epsilon = 1e-14);
            }
        }
        let at_pi = MarkovTrajectory::new(vec![0.0, 1.0], vec![pi.clone(), pi.clone()]).unwrap();
        let a = geometric_mean_flux(&r, &pi, &at_pi).unwrap();
        let b = typical_flux(&r, &at_pi).unwrap();
        assert!(a.cell(0).iter().zip(b.cell(0)).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn h_theorem_and_solution_verdict() {
        let r = RateMatrix::from_fn(5, |x, y| if y == (x + 1) % 5 { 2.0 } else { 0.2 + 0.1 * y as f64 }).unwrap();
        let pi = stationary_measure(&r).unwrap();
        let traj = kolmogorov_evolve(&r, &pv(&[0.6, 0.1, 0.1, 0.1, 0.1]), 1.0, 4096).unwrap();
        let ents: Vec<f64> = traj.states().iter().map(|p| relative_entropy(p, &pi).unwrap()).collect();
        assert!(ents.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let check = variational_check(&r, &pi, &traj, &typical_flux(&r, &traj).unwrap()).unwrap();
        assert_eq!(check.verdict, Verdict::Solution);
        assert!(check.gap.abs() < 1e-6);
        assert!(check.decomposition_residual.unwrap() < 1e-8);
        // reversed-process H-theorem: the swapped reversed flux has zero reversed term
        let u = swap_map(&reversed_flux(&r, &pi, &traj).unwrap());
        let rep = entropy_balance_report(&r, &pi, &traj, &u).unwrap();
        assert!(rep.terms.e_reversed.unwrap().0 < 1e-14);
        let perturbed = typical_flux(&r, &traj).unwrap().with_symmetric_component(0.5);
        let bad = variational_check(&r, &pi, &traj, &perturbed).unwrap();
        assert_eq!(bad.verdict, Verdict::NotSolution);
        assert!(bad.gap > 0.0);
    }

    #[test]
    fn shrinking_support_is_flagged() {
        let r = two_state();
        let pi = stationary_measure(&r).unwrap();
        let traj = kolmogorov_evolve(&r, &pv(&[1.0, 0.0]), 1.0, 16).unwrap();
        let rep = entropy_balance_report(&r, &pi, &traj, &typical_flux(&r, &traj).unwrap()).unwrap();
        assert!(rep.has_flag("support-shrunk"));
        assert!(rep.balance_residual().is_none());
    }
}
