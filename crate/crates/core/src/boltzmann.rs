//! Homogeneous Boltzmann equation on a finite state space.
//!
//! A kernel `B(v, w, a, b)` is the rate at which an incoming pair `(v, w)`
//! becomes the outgoing pair `(a, b)`. The finite-state strong form used by
//! [`boltzmann_evolve`] is read off the weak form with `phi = 1_z`:
//!
//! ```text
//! dP(z)/dt = 1/2 sum B(v,w,z,b) P(v)P(w) + 1/2 sum B(v,w,a,z) P(v)P(w)
//!          - 1/2 P(z) sum B(z,w,a,b) P(w) - 1/2 P(z) sum B(v,z,a,b) P(v)
//! ```
//!
//! which reduces to the one-slot form under the kernel symmetries.

use crate::error::{check_dim, Error, Result};
use crate::integrate;
use crate::linalg;
use crate::markov::{clamp_slice, validate_grid, MarkovTrajectory, VariationalCheck, CLAMP_FLOOR};
use crate::measures::{positive_entropy_cell, relative_entropy, PositiveMeasure, ProbabilityVector};
use crate::report::{assemble, EntropyReport, ExtReal, RawTerms};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Largest state count stored as a dense n^4 tensor.
pub const DENSE_MAX_STATES: usize = 96;
/// Largest pair-space size solved with a dense LU.
pub const DENSE_PAIR_LIMIT: usize = 1024;

#[inline]
fn idx4(n: usize, v: usize, w: usize, a: usize, b: usize) -> usize {
    ((v * n + w) * n + a) * n + b
}

/// One product term `weight * p(a | v, w) * p(b | v, w)` of a factored
/// outgoing law. `marginal[(v * n + w) * n + a]` is `p(a | v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductComponent {
    pub weight: f64,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Dense(Vec<f64>),
    /// B = rate(v, w) * sum_c weight_c p_c(a | v, w) p_c(b | v, w)
    Mixture { components: Vec<ProductComponent> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionKernel {
    n: usize,
    repr: Repr,
    /// Lambda(v, w) = sum_{a, b} B(v, w, a, b)
    rate: Vec<f64>,
    /// G(v, w, z) = 1/2 sum_b B(v,w,z,b) + 1/2 sum_a B(v,w,a,z)
    gain: Vec<f64>,
}

impl CollisionKernel {
    /// Dense kernel from a row-major tensor in index order (v, w, a, b).
    pub fn dense(n: usize, b: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("kernel needs at least one state".into()));
        }
        if n > DENSE_MAX_STATES {
            return Err(Error::Invalid(format!(
                "dense kernels are limited to {DENSE_MAX_STATES} states; use a factored kernel"
            )));
        }
        check_dim(n * n * n * n, b.len())?;
        if let Some(x) = b.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::Invalid(format!("kernel entry {x} is not a finite nonnegative number")));
        }
        let n2 = n * n;
        let mut rate = vec![0.0; n2];
        let mut gain = vec![0.0; n2 * n];
        for vw in 0..n2 {
            let row = &b[vw * n2..(vw + 1) * n2];
            rate[vw] = row.iter().sum();
            for a in 0..n {
                for bb in 0..n {
                    let x = 0.5 * row[a * n + bb];
                    gain[vw * n + a] += x;
                    gain[vw * n + bb] += x;
                }
            }
        }
        Ok(Self { n, repr: Repr::Dense(b), rate, gain })
    }

    /// Factored kernel `rate(v,w) * sum_c w_c p_c(a|v,w) p_c(b|v,w)`.
    pub fn product_mixture(n: usize, rate: Vec<f64>, components: Vec<ProductComponent>) -> Result<Self> {
        let n2 = n * n;
        check_dim(n2, rate.len())?;
        if components.is_empty() {
            return Err(Error::Invalid("factored kernel needs at least one component".into()));
        }
        if rate.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Invalid("collision rates must be finite and nonnegative".into()));
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-12 || components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::Invalid(format!("component weights must be nonnegative and sum to 1 (got {wsum})")));
        }
        for c in &components {
            check_dim(n2 * n, c.marginal.len())?;
            for vw in 0..n2 {
                let row = &c.marginal[vw * n..(vw + 1) * n];
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-12 || row.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::Invalid(format!("marginal row {vw} is not a probability vector (sum {s})")));
                }
            }
        }
        let mut gain = vec![0.0; n2 * n];
        for vw in 0..n2 {
            for c in &components {
                for z in 0..n {
                    gain[vw * n + z] += rate[vw] * c.weight * c.marginal[vw * n + z];
                }
            }
        }
        Ok(Self { n, repr: Repr::Mixture { components }, rate, gain })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense(_))
    }

    #[inline]
    pub fn get(&self, v: usize, w: usize, a: usize, b: usize) -> f64 {
        let n = self.n;
        match &self.repr {
            Repr::Dense(t) => t[idx4(n, v, w, a, b)],
            Repr::Mixture { components } => {
                let vw = v * n + w;
                self.rate[vw]
                    * components
                        .iter()
                        .map(|c| c.weight * c.marginal[vw * n + a] * c.marginal[vw * n + b])
                        .sum::<f64>()
            }
        }
    }

    /// Outgoing densities (a, b) of the incoming pair (v, w), row-major.
    pub fn outgoing(&self, v: usize, w: usize) -> Vec<f64> {
        let n = self.n;
        match &self.repr {
            Repr::Dense(t) => {
                let s = idx4(n, v, w, 0, 0);
                t[s..s + n * n].to_vec()
            }
            Repr::Mixture { .. } => (0..n * n).map(|i| self.get(v, w, i / n, i % n)).collect(),
        }
    }

    /// Draws an outgoing pair with probability B(v, w, a, b) / Lambda(v, w).
    pub fn sample_outgoing<R: rand::Rng>(&self, v: usize, w: usize, rng: &mut R) -> (usize, usize) {
        let n = self.n;
        let vw = v * n + w;
        let pick = |row: &mut dyn Iterator<Item = f64>, total: f64, rng: &mut R| {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut last = 0;
            for (i, x) in row.enumerate() {
                if x > 0.0 {
                    last = i;
                }
                acc += x;
                if u < acc {
                    return i;
                }
            }
            last
        };
        match &self.repr {
            Repr::Dense(t) => {
                let s = vw * n * n;
                let i = pick(&mut t[s..s + n * n].iter().cloned(), self.rate[vw], rng);
                (i / n, i % n)
            }
            Repr::Mixture { components } => {
                let c = pick(&mut components.iter().map(|c| c.weight), 1.0, rng);
                let m = &components[c].marginal[vw * n..(vw + 1) * n];
                let a = pick(&mut m.iter().cloned(), 1.0, rng);
                let b = pick(&mut m.iter().cloned(), 1.0, rng);
                (a, b)
            }
        }
    }

    /// Lambda(v, w), the total collision rate of the pair.
    pub fn total_rate(&self, v: usize, w: usize) -> f64 {
        self.rate[v * self.n + w]
    }

    pub fn total_rates(&self) -> &[f64] {
        &self.rate
    }

    pub fn to_dense(&self) -> Result<CollisionKernel> {
        if self.is_dense() {
            return Ok(self.clone());
        }
        let n = self.n;
        if n > DENSE_MAX_STATES {
            return Err(Error::Invalid(format!("{n} states exceed the dense limit")));
        }
        let mut t = vec![0.0; n * n * n * n];
        t.par_chunks_mut(n * n).enumerate().for_each(|(vw, row)| {
            for (i, x) in row.iter_mut().enumerate() {
                *x = self.get(vw / n, vw % n, i / n, i % n);
            }
        });
        CollisionKernel::dense(n, t)
    }

    /// Dense tensor in index order (v, w, a, b).
    pub fn tensor(&self) -> Result<Vec<f64>> {
        match self.to_dense()?.repr {
            Repr::Dense(t) => Ok(t),
            Repr::Mixture { .. } => unreachable!(),
        }
    }

    pub fn min_entry(&self) -> f64 {
        let n = self.n;
        match &self.repr {
            Repr::Dense(t) => t.iter().cloned().fold(f64::INFINITY, f64::min),
            Repr::Mixture { .. } => (0..n.pow(4))
                .map(|i| self.get(i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Time derivative of P under the Boltzmann equation.
    pub fn collision_rhs(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|x| *x = 0.0);
        for v in 0..n {
            let pv = p[v];
            if pv == 0.0 {
                continue;
            }
            for w in 0..n {
                let pp = pv * p[w];
                if pp == 0.0 {
                    continue;
                }
                let vw = v * n + w;
                let g = &self.gain[vw * n..(vw + 1) * n];
                for z in 0..n {
                    out[z] += pp * g[z];
                }
                let loss = 0.5 * pp * self.rate[vw];
                out[v] -= loss;
                out[w] -= loss;
            }
        }
    }

    /// I(v, w) = sum_{a, b} B(a, b, v, w) pi(a) pi(b), the mass flowing into
    /// the pair (v, w) at pi (x) pi.
    pub fn incoming_mass(&self, pi: &[f64]) -> Vec<f64> {
        let n = self.n;
        let n2 = n * n;
        match &self.repr {
            Repr::Dense(t) => {
                let mut out = vec![0.0; n2];
                for ab in 0..n2 {
                    let w = pi[ab / n] * pi[ab % n];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, x) in out.iter_mut().zip(&t[ab * n2..(ab + 1) * n2]) {
                        *o += w * x;
                    }
                }
                out
            }
            Repr::Mixture { components } => {
                let mut out = vec![0.0; n2];
                for c in components {
                    // sum_ab s(ab) p(v|ab) p(w|ab) with s = weight * rate * pi pi
                    let part: Vec<f64> = (0..n)
                        .into_par_iter()
                        .flat_map_iter(|v| {
                            let mut row = vec![0.0; n];
                            for ab in 0..n2 {
                                let s = c.weight * self.rate[ab] * pi[ab / n] * pi[ab % n] * c.marginal[ab * n + v];
                                if s == 0.0 {
                                    continue;
                                }
                                let m = &c.marginal[ab * n..(ab + 1) * n];
                                for w in 0..n {
                                    row[w] += s * m[w];
                                }
                            }
                            row
                        })
                        .collect();
                    out.iter_mut().zip(part).for_each(|(o, x)| *o += x);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    /// max |B(v,w,a,b) - B(w,v,a,b)|
    pub incoming_defect: f64,
    /// max |B(v,w,a,b) - B(v,w,b,a)|
    pub outgoing_defect: f64,
}

impl SymmetryReport {
    pub fn max_defect(&self) -> f64 {
        self.incoming_defect.max(self.outgoing_defect)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_defect() <= tol
    }
}

pub fn check_symmetries(b: &CollisionKernel) -> SymmetryReport {
    let n = b.n;
    let (inc, out) = (0..n)
        .into_par_iter()
        .map(|v| {
            let (mut i, mut o) = (0.0f64, 0.0f64);
            for w in 0..n {
                for a in 0..n {
                    for bb in 0..n {
                        let x = b.get(v, w, a, bb);
                        i = i.max((x - b.get(w, v, a, bb)).abs());
                        o = o.max((x - b.get(v, w, bb, a)).abs());
                    }
                }
            }
            (i, o)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    SymmetryReport { incoming_defect: inc, outgoing_defect: out }
}

/// Average over the group generated by the incoming and outgoing swaps.
/// Factored kernels that are already symmetric are returned unchanged;
/// otherwise the result is dense.
pub fn symmetrize(b: &CollisionKernel) -> Result<CollisionKernel> {
    if !b.is_dense() && check_symmetries(b).max_defect() == 0.0 {
        return Ok(b.clone());
    }
    let n = b.n;
    let d = b.to_dense()?;
    let mut t = vec![0.0; n.pow(4)];
    for v in 0..n {
        for w in 0..n {
            for a in 0..n {
                for bb in 0..n {
                    t[idx4(n, v, w, a, bb)] =
                        0.25 * (d.get(v, w, a, bb) + d.get(w, v, a, bb) + d.get(v, w, bb, a) + d.get(w, v, bb, a));
                }
            }
        }
    }
    CollisionKernel::dense(n, t)
}

/// max_v |pi(v) sum_w Lambda(v,w) pi(w) - sum_{w,a,b} B(a,b,v,w) pi(a) pi(b)|
pub fn boltzmann_equilibrium_residual(b: &CollisionKernel, pi: &ProbabilityVector) -> Result<f64> {
    check_dim(b.n, pi.n_states())?;
    let n = b.n;
    let p = pi.weights();
    let inc = b.incoming_mass(p);
    Ok((0..n)
        .map(|v| {
            let lhs: f64 = (0..n).map(|w| p[v] * b.total_rate(v, w) * p[w]).sum();
            let rhs: f64 = (0..n).map(|w| inc[v * n + w]).sum();
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationResidual {
    /// max over pairs of |pi pi Lambda - incoming mass|
    pub max_norm: f64,
    /// sum over pairs of the same defect
    pub l1: f64,
    /// max_norm divided by max over pairs of pi pi Lambda
    pub relative: f64,
}

pub fn factorization_residual(b: &CollisionKernel, pi: &ProbabilityVector) -> Result<FactorizationResidual> {
    check_dim(b.n, pi.n_states())?;
    let n = b.n;
    let p = pi.weights();
    let inc = b.incoming_mass(p);
    let (mut mx, mut l1, mut scale) = (0.0f64, 0.0, 0.0f64);
    for v in 0..n {
        for w in 0..n {
            let out = p[v] * p[w] * b.total_rate(v, w);
            let d = (out - inc[v * n + w]).abs();
            mx = mx.max(d);
            l1 += d;
            scale = scale.max(out);
        }
    }
    Ok(FactorizationResidual { max_norm: mx, l1, relative: if scale > 0.0 { mx / scale } else { 0.0 } })
}

/// Stationary law of the two-particle chain jumping (v,w) -> (a,b) at rate
/// B(v, w, a, b).
pub fn two_particle_stationary(b: &CollisionKernel) -> Result<PositiveMeasure> {
    let n = b.n;
    let n2 = n * n;
    let lam_max = b.rate.iter().cloned().fold(0.0, f64::max);
    if lam_max == 0.0 {
        return Err(Error::Invalid("kernel has no collisions".into()));
    }
    let big = 1.05 * lam_max;
    let rows: Vec<Vec<f64>> = (0..n2).map(|vw| b.outgoing(vw / n, vw % n)).collect();
    let classes = linalg::communicating_classes(
        n2,
        rows.iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, x)| **x > 0.0).map(move |(j, _)| (i, j))),
    );
    if classes.len() > 1 {
        return Err(Error::Reducible { classes });
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n2 {
            y[i] = x[i] * (1.0 - b.rate[i] / big);
        }
        for (i, r) in rows.iter().enumerate() {
            let s = x[i] / big;
            if s == 0.0 {
                continue;
            }
            for (yj, rj) in y.iter_mut().zip(r) {
                *yj += s * rj;
            }
        }
    };
    let g = if n2 <= DENSE_PAIR_LIMIT {
        let mut a = DMatrix::zeros(n2, n2);
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                a[(j, i)] += x;
            }
            a[(i, i)] -= b.rate[i];
        }
        linalg::null_vector_dense(a)?
    } else {
        linalg::stationary_gmres(n2, apply, 1e-13, 100, 50_000)?.0
    };
    let mut y = vec![0.0; n2];
    apply(&g, &mut y);
    let res = g.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * big;
    if res > 1e-12 * lam_max.max(1.0) {
        return Err(Error::NoConvergence { iterations: 0, residual: res });
    }
    PositiveMeasure::new(g)
}

/// B_hat(a, b, v, w) = B(v, w, a, b) pi(v) pi(w) / (pi(a) pi(b)); always dense.
pub fn reversed_kernel(b: &CollisionKernel, pi: &ProbabilityVector) -> Result<CollisionKernel> {
    check_dim(b.n, pi.n_states())?;
    if pi.min_weight() <= 0.0 {
        return Err(Error::Invalid("pi must be strictly positive".into()));
    }
    let n = b.n;
    if n > DENSE_MAX_STATES {
        return Err(Error::Invalid(format!("{n} states exceed the dense limit")));
    }
    let p = pi.weights();
    let mut t = vec![0.0; n.pow(4)];
    for v in 0..n {
        for w in 0..n {
            for a in 0..n {
                for bb in 0..n {
                    t[idx4(n, a, bb, v, w)] = b.get(v, w, a, bb) * p[v] * p[w] / (p[a] * p[bb]);
                }
            }
        }
    }
    CollisionKernel::dense(n, t)
}

pub fn boltzmann_evolve(b: &CollisionKernel, p0: &ProbabilityVector, t_end: f64, n_steps: usize) -> Result<MarkovTrajectory> {
    let grid = integrate::uniform_grid(t_end, n_steps)?;
    boltzmann_evolve_on_grid(b, p0, grid)
}

/// As [`boltzmann_evolve`] on an arbitrary grid. Cell averages of P (x) P
/// are tracked for up to 64 states so that collision fluxes satisfy the
/// discrete continuity equation to integrator accuracy.
pub fn boltzmann_evolve_on_grid(b: &CollisionKernel, p0: &ProbabilityVector, grid: Vec<f64>) -> Result<MarkovTrajectory> {
    check_dim(b.n, p0.n_states())?;
    validate_grid(&grid)?;
    let run = integrate::integrate_on_simplex(|p, out| b.collision_rhs(p, out), p0.weights(), &grid, b.n <= 64)?;
    MarkovTrajectory::from_run(grid, run)
}

/// A nonnegative density on X^4 per time cell, index order (v, w, a, b).
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannFluxPath {
    t_grid: Vec<f64>,
    n: usize,
    q: Vec<Vec<f64>>,
}

impl BoltzmannFluxPath {
    pub fn new(t_grid: Vec<f64>, n: usize, q: Vec<Vec<f64>>) -> Result<Self> {
        validate_grid(&t_grid)?;
        check_dim(t_grid.len() - 1, q.len())?;
        for c in &q {
            check_dim(n.pow(4), c.len())?;
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

    pub fn cell_mass(&self, k: usize) -> f64 {
        self.q[k].iter().sum()
    }

    /// max defect of the incoming and outgoing swap symmetries
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for c in &self.q {
            for v in 0..n {
                for w in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let x = c[idx4(n, v, w, a, b)];
                            d = d.max((x - c[idx4(n, w, v, a, b)]).abs());
                            d = d.max((x - c[idx4(n, v, w, b, a)]).abs());
                        }
                    }
                }
            }
        }
        d
    }

    /// Adds `s` averaged over the swaps and the exchange of incoming with
    /// outgoing pairs. The added part has zero divergence and keeps the
    /// flux symmetric.
    pub fn plus_invariant(&self, s: impl Fn(usize, usize, usize, usize, usize) -> f64) -> Result<Self> {
        let n = self.n;
        let mut out = self.clone();
        for (k, c) in out.q.iter_mut().enumerate() {
            for v in 0..n {
                for w in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let tot = s(k, v, w, a, b) + s(k, w, v, a, b) + s(k, v, w, b, a) + s(k, w, v, b, a)
                                + s(k, a, b, v, w) + s(k, b, a, v, w) + s(k, a, b, w, v) + s(k, b, a, w, v);
                            if !(tot >= 0.0) {
                                return Err(Error::Invalid("invariant component must be nonnegative".into()));
                            }
                            c[idx4(n, v, w, a, b)] += tot / 8.0;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// P (x) P averaged over cell k.
fn cell_pair(traj: &MarkovTrajectory, k: usize) -> Vec<f64> {
    let n = traj.n_states();
    match traj.pair_mean(k) {
        Some(m) => m.to_vec(),
        None => {
            let p = traj.cell_state(k);
            (0..n * n).map(|i| p[i / n] * p[i % n]).collect()
        }
    }
}

fn collision_flux(
    b: &CollisionKernel,
    traj: &MarkovTrajectory,
    f: impl Fn(&[f64], usize, usize, usize, usize) -> f64 + Sync,
) -> Result<BoltzmannFluxPath> {
    check_dim(b.n, traj.n_states())?;
    let n = b.n;
    let q = (0..traj.n_cells())
        .into_par_iter()
        .map(|k| {
            let m2 = cell_pair(traj, k);
            let mut c = vec![0.0; n.pow(4)];
            for v in 0..n {
                for w in 0..n {
                    for a in 0..n {
                        for bb in 0..n {
                            c[idx4(n, v, w, a, bb)] = f(&m2, v, w, a, bb);
                        }
                    }
                }
            }
            c
        })
        .collect();
    BoltzmannFluxPath::new(traj.t_grid().to_vec(), n, q)
}

/// q = 1/2 B(v, w, a, b) P(v) P(w)
pub fn typical_collision_flux(b: &CollisionKernel, traj: &MarkovTrajectory) -> Result<BoltzmannFluxPath> {
    let n = b.n;
    collision_flux(b, traj, |m2, v, w, a, bb| 0.5 * b.get(v, w, a, bb) * m2[v * n + w])
}

/// q = 1/2 B_hat(v, w, a, b) P(v) P(w)
pub fn reversed_collision_flux(
    b: &CollisionKernel,
    pi: &ProbabilityVector,
    traj: &MarkovTrajectory,
) -> Result<BoltzmannFluxPath> {
    check_dim(b.n, pi.n_states())?;
    if pi.min_weight() <= 0.0 {
        return Err(Error::Invalid("pi must be strictly positive".into()));
    }
    let n = b.n;
    let p = pi.weights();
    // B_hat(v,w,a,b) = B(a,b,v,w) pi(a) pi(b) / (pi(v) pi(w))
    collision_flux(b, traj, |m2, v, w, a, bb| {
        0.5 * b.get(a, bb, v, w) * p[a] * p[bb] / (p[v] * p[w]) * m2[v * n + w]
    })
}

/// Exchanges incoming and outgoing pairs: (v, w, a, b) -> (a, b, v, w).
pub fn swap_collision_flux(flux: &BoltzmannFluxPath) -> BoltzmannFluxPath {
    let n = flux.n;
    let n2 = n * n;
    let q = flux
        .q
        .iter()
        .map(|c| (0..n2 * n2).map(|i| c[(i % n2) * n2 + i / n2]).collect())
        .collect();
    BoltzmannFluxPath { t_grid: flux.t_grid.clone(), n, q }
}

/// Max over cells and states of the defect of
/// Delta P(z) = dt sum q(v,w,a,b) [1_a(z) + 1_b(z) - 1_v(z) - 1_w(z)].
pub fn collision_continuity_residual(traj: &MarkovTrajectory, flux: &BoltzmannFluxPath) -> Result<f64> {
    check_dim(traj.n_states(), flux.n)?;
    check_dim(traj.n_cells(), flux.n_cells())?;
    let n = flux.n;
    let n2 = n * n;
    let mut worst: f64 = 0.0;
    for k in 0..flux.n_cells() {
        let c = &flux.q[k];
        let mut div = vec![0.0; n];
        for vw in 0..n2 {
            let row = &c[vw * n2..(vw + 1) * n2];
            let mut tot = 0.0;
            for (ab, x) in row.iter().enumerate() {
                div[ab / n] += x;
                div[ab % n] += x;
                tot += x;
            }
            div[vw / n] -= tot;
            div[vw % n] -= tot;
        }
        let dt = traj.dt(k);
        let (p0, p1) = (traj.states()[k].weights(), traj.states()[k + 1].weights());
        for z in 0..n {
            worst = worst.max((p1[z] - p0[z] - dt * div[z]).abs());
        }
    }
    Ok(worst)
}

/// D2(P) = sum 1/2 B pi(v) pi(w) (sqrt(f(v) f(w)) - sqrt(f(a) f(b)))^2
pub fn dirichlet_form2(b: &CollisionKernel, pi: &ProbabilityVector, p: &ProbabilityVector) -> Result<f64> {
    check_dim(b.n, pi.n_states())?;
    check_dim(b.n, p.n_states())?;
    let n = b.n;
    let f = p.density(pi)?;
    let pw = pi.weights();
    let ff: Vec<f64> = (0..n * n).map(|i| f[i / n] * f[i % n] * pw[i / n] * pw[i % n]).collect();
    Ok(dirichlet2_pairs(b, pw, &ff))
}

/// D2 from the pair law m2 (P (x) P or its time average).
fn dirichlet2_pairs(b: &CollisionKernel, pi: &[f64], m2: &[f64]) -> f64 {
    let n = b.n;
    let sf: Vec<f64> = (0..n * n).map(|i| (m2[i] / (pi[i / n] * pi[i % n])).sqrt()).collect();
    let mut s = 0.0;
    for vw in 0..n * n {
        let base = 0.5 * pi[vw / n] * pi[vw % n];
        for ab in 0..n * n {
            let d = sf[vw] - sf[ab];
            if d != 0.0 {
                s += base * b.get(vw / n, vw % n, ab / n, ab % n) * d * d;
            }
        }
    }
    s
}

fn clamp_pairs(m2: &[f64]) -> Vec<f64> {
    let s: f64 = m2.iter().sum();
    let mut v: Vec<f64> = m2.iter().map(|x| if *x < CLAMP_FLOOR * CLAMP_FLOOR { 0.0 } else { *x / s }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Entropy balance of (traj, flux) against (B, pi).
pub fn boltzmann_entropy_balance(
    b: &CollisionKernel,
    pi: &ProbabilityVector,
    traj: &MarkovTrajectory,
    flux: &BoltzmannFluxPath,
) -> Result<EntropyReport> {
    check_dim(b.n, pi.n_states())?;
    check_dim(b.n, traj.n_states())?;
    check_dim(b.n, flux.n)?;
    check_dim(traj.n_cells(), flux.n_cells())?;
    if pi.min_weight() <= 0.0 {
        return Err(Error::Invalid("pi must be strictly positive".into()));
    }
    let n = b.n;
    let n2 = n * n;
    let w = pi.weights();
    let fr = factorization_residual(b, pi)?;
    let continuity = collision_continuity_residual(traj, flux)?;
    let ent_0 = relative_entropy(&traj.first().clamped(CLAMP_FLOOR), pi)?;
    let ent_t = relative_entropy(&traj.last().clamped(CLAMP_FLOOR), pi)?;
    let mut shrunk = traj.states().iter().any(|s| s.weights().iter().any(|v| *v < CLAMP_FLOOR));
    let base: Vec<f64> = (0..n2 * n2)
        .map(|i| {
            let (vw, ab) = (i / n2, i % n2);
            0.5 * b.get(vw / n, vw % n, ab / n, ab % n) * w[vw / n] * w[vw % n]
        })
        .collect();
    let per_cell: Vec<(f64, f64, f64, f64, bool)> = (0..traj.n_cells())
        .into_par_iter()
        .map(|k| {
            let dt = traj.dt(k);
            let p = clamp_slice(traj.cell_state(k));
            let m2 = clamp_pairs(&cell_pair(traj, k));
            let zero = p.iter().any(|x| *x == 0.0);
            let f2: Vec<f64> = (0..n2).map(|i| m2[i] / (w[i / n] * w[i % n])).collect();
            let c = &flux.q[k];
            let (mut cf, mut cr, mut cg) = (0.0, 0.0, 0.0);
            for vw in 0..n2 {
                for ab in 0..n2 {
                    let i = vw * n2 + ab;
                    let (x, bs) = (c[i], base[i]);
                    if x == 0.0 && bs == 0.0 {
                        continue;
                    }
                    cf += positive_entropy_cell(x, bs * f2[vw]);
                    cr += positive_entropy_cell(x, bs * f2[ab]);
                    cg += positive_entropy_cell(x, bs * (f2[vw] * f2[ab]).sqrt());
                }
            }
            (dt * cf, dt * cr, dt * cg, dt * dirichlet2_pairs(b, w, &m2), zero)
        })
        .collect();
    let (mut e_f, mut e_r, mut e_g, mut dir) = (0.0, 0.0, 0.0, 0.0);
    for (a, bb, c, d, z) in per_cell {
        e_f += a;
        e_r += bb;
        e_g += c;
        dir += d;
        shrunk |= z;
    }
    let mut rep = assemble(
        "boltzmann",
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
        true,
    );
    rep.terms.factorization_residual = Some(ExtReal(fr.max_norm));
    if fr.max_norm > 1e-10 {
        rep.flags.push("factorization-violated".to_string());
    }
    Ok(rep)
}

pub fn boltzmann_variational_check(
    b: &CollisionKernel,
    pi: &ProbabilityVector,
    traj: &MarkovTrajectory,
    flux: &BoltzmannFluxPath,
) -> Result<VariationalCheck> {
    Ok(VariationalCheck::from_report(boltzmann_entropy_balance(b, pi, traj, flux)?))
}

/// A transition probability on X^2, (v, w) -> (a, b).
#[derive(Debug, Clone, PartialEq)]
pub enum PairTransition {
    /// Row-major n^2 x n^2 matrix.
    Dense { n: usize, p: Vec<f64> },
    /// sum_c weight_c p_c(a | v, w) p_c(b | v, w)
    Product { n: usize, components: Vec<ProductComponent> },
}

impl PairTransition {
    pub fn dense(n: usize, p: Vec<f64>) -> Result<Self> {
        check_dim(n.pow(4), p.len())?;
        let t = PairTransition::Dense { n, p };
        t.validate()?;
        Ok(t)
    }

    pub fn product(n: usize, components: Vec<ProductComponent>) -> Result<Self> {
        let t = PairTransition::Product { n, components };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let d = self.max_row_defect();
        if d > 1e-10 {
            return Err(Error::Invalid(format!("pair transition rows do not sum to 1 (defect {d:e})")));
        }
        let n2 = self.n_states().pow(2);
        if (0..n2).any(|i| self.row(i).iter().any(|x| !(*x >= 0.0))) {
            return Err(Error::Invalid("pair transition has negative entries".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        match self {
            PairTransition::Dense { n, .. } | PairTransition::Product { n, .. } => *n,
        }
    }

    /// Row of incoming pair index vw = v * n + w over outgoing ab.
    pub fn row(&self, vw: usize) -> Vec<f64> {
        match self {
            PairTransition::Dense { n, p } => {
                let n2 = n * n;
                p[vw * n2..(vw + 1) * n2].to_vec()
            }
            PairTransition::Product { n, components } => {
                let n = *n;
                let mut r = vec![0.0; n * n];
                for c in components {
                    let m = &c.marginal[vw * n..(vw + 1) * n];
                    for a in 0..n {
                        for b in 0..n {
                            r[a * n + b] += c.weight * m[a] * m[b];
                        }
                    }
                }
                r
            }
        }
    }

    pub fn max_row_defect(&self) -> f64 {
        let n2 = self.n_states().pow(2);
        (0..n2).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// y = P^T x over the pair space.
    pub fn apply_transposed(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_states();
        let n2 = n * n;
        y.iter_mut().for_each(|v| *v = 0.0);
        match self {
            PairTransition::Dense { p, .. } => {
                for i in 0..n2 {
                    if x[i] == 0.0 {
                        continue;
                    }
                    for (yj, pj) in y.iter_mut().zip(&p[i * n2..(i + 1) * n2]) {
                        *yj += x[i] * pj;
                    }
                }
            }
            PairTransition::Product { components, .. } => {
                for c in components {
                    for vw in 0..n2 {
                        let s = c.weight * x[vw];
                        if s == 0.0 {
                            continue;
                        }
                        let m = &c.marginal[vw * n..(vw + 1) * n];
                        for a in 0..n {
                            let sa = s * m[a];
                            for b in 0..n {
                                y[a * n + b] += sa * m[b];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Unique stationary law g = g P on the pair space.
    pub fn stationary(&self) -> Result<PositiveMeasure> {
        let n2 = self.n_states().pow(2);
        let g = if n2 <= DENSE_PAIR_LIMIT {
            let mut a = DMatrix::zeros(n2, n2);
            for i in 0..n2 {
                for (j, x) in self.row(i).iter().enumerate() {
                    a[(j, i)] += x;
                }
                a[(i, i)] -= 1.0;
            }
            linalg::null_vector_dense(a)?
        } else {
            linalg::stationary_gmres(n2, |x, y| self.apply_transposed(x, y), 1e-13, 100, 50_000)?.0
        };
        let r = self.stationary_residual(&g);
        if r > 1e-10 {
            return Err(Error::NoConvergence { iterations: 0, residual: r });
        }
        PositiveMeasure::new(g)
    }

    /// max |g P - g|
    pub fn stationary_residual(&self, g: &[f64]) -> f64 {
        let mut y = vec![0.0; g.len()];
        self.apply_transposed(g, &mut y);
        g.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// B = lambda * P2 with lambda(v, w) = c g(v, w) / (pi(v) pi(w)), where g is
/// the stationary law of P2.
pub fn build_kernel_from_two_particle(p2: &PairTransition, pi: &ProbabilityVector, c: f64) -> Result<CollisionKernel> {
    let g = p2.stationary()?;
    kernel_from_stationary(p2, g.weights(), pi, c)
}

/// The same construction with a precomputed stationary law.
pub fn kernel_from_stationary(p2: &PairTransition, g: &[f64], pi: &ProbabilityVector, c: f64) -> Result<CollisionKernel> {
    let n = p2.n_states();
    check_dim(n, pi.n_states())?;
    check_dim(n * n, g.len())?;
    if !(c > 0.0) {
        return Err(Error::Invalid(format!("c must be positive, got {c}")));
    }
    let p = pi.weights();
    let mut lam = vec![0.0; n * n];
    for vw in 0..n * n {
        let pp = p[vw / n] * p[vw % n];
        if pp == 0.0 {
            if g[vw] > 0.0 {
                return Err(Error::Invalid(format!("g charges the pi (x) pi null pair {vw}")));
            }
            continue;
        }
        lam[vw] = c * g[vw] / pp;
    }
    match p2 {
        PairTransition::Dense { p, .. } => {
            let n2 = n * n;
            let t: Vec<f64> = (0..n2 * n2).map(|i| lam[i / n2] * p[i]).collect();
            CollisionKernel::dense(n, t)
        }
        PairTransition::Product { components, .. } => CollisionKernel::product_mixture(n, lam, components.clone()),
    }
}
