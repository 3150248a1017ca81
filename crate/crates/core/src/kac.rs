//! N-particle Kac walk with generator (1/N) sum_{i<j} L_ij, where the pair
//! (v_i, v_j) jumps to (a, b) at rate B(v_i, v_j, a, b).
//!
//! Configurations of the exact solver are indexed with particle 0 as the
//! most significant digit: `index = sum_i v_i n^(N-1-i)`.

use crate::boltzmann::{boltzmann_evolve, CollisionKernel};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::measures::{PositiveMeasure, ProbabilityVector};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest configuration space handled by [`exact_invariant_measure`].
pub const MAX_CONFIGS: usize = 1 << 20;
const DENSE_CONFIGS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    /// i < j
    pub i: usize,
    pub j: usize,
    pub pre: (usize, usize),
    pub post: (usize, usize),
}

/// Per-replica generator: stream `replica` of the ChaCha8 generator seeded
/// with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(replica);
    r
}

pub fn sample_config<R: Rng>(p0: &ProbabilityVector, n_particles: usize, rng: &mut R) -> Vec<usize> {
    let w = p0.weights();
    (0..n_particles)
        .map(|_| {
            let u = rng.gen::<f64>();
            let mut acc = 0.0;
            for (s, x) in w.iter().enumerate() {
                acc += x;
                if u < acc {
                    return s;
                }
            }
            w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
        })
        .collect()
}

/// Event-driven exact simulation. Particles are grouped by state so that
/// each event costs O(n_states) plus the outgoing draw.
pub struct KacWalk<'a> {
    b: &'a CollisionKernel,
    config: Vec<usize>,
    members: Vec<Vec<usize>>,
    pos: Vec<usize>,
    /// partial[s] = sum_t count_t Lambda(s, t)
    partial: Vec<f64>,
    time: f64,
    n_events: u64,
    rng: ChaCha8Rng,
}

impl<'a> KacWalk<'a> {
    pub fn new(b: &'a CollisionKernel, config: Vec<usize>, rng: ChaCha8Rng) -> Result<Self> {
        let n = b.n_states();
        if config.len() < 2 {
            return Err(Error::Invalid(format!("the walk needs N >= 2 particles, got {}", config.len())));
        }
        if let Some(v) = config.iter().find(|v| **v >= n) {
            return Err(Error::Invalid(format!("state {v} out of range for {n} states")));
        }
        let sym = crate::boltzmann::check_symmetries(b);
        if sym.incoming_defect > 1e-12 {
            return Err(Error::Invalid(format!("kernel is not symmetric in the incoming pair (defect {:e})", sym.incoming_defect)));
        }
        let mut members = vec![Vec::new(); n];
        let mut pos = vec![0; config.len()];
        for (i, s) in config.iter().enumerate() {
            pos[i] = members[*s].len();
            members[*s].push(i);
        }
        let mut w = Self { b, config, members, pos, partial: vec![0.0; n], time: 0.0, n_events: 0, rng };
        w.refresh();
        Ok(w)
    }

    fn refresh(&mut self) {
        let n = self.b.n_states();
        for s in 0..n {
            self.partial[s] = (0..n).map(|t| self.members[t].len() as f64 * self.b.total_rate(s, t)).sum();
        }
    }

    pub fn config(&self) -> &[usize] {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n_events(&self) -> u64 {
        self.n_events
    }

    pub fn n_particles(&self) -> usize {
        self.config.len()
    }

    /// sum_s c_s (partial_s - Lambda(s, s)) = 2 sum_{i<j} Lambda(v_i, v_j)
    fn ordered_weights(&self) -> Vec<f64> {
        (0..self.b.n_states())
            .map(|s| {
                let c = self.members[s].len() as f64;
                if c == 0.0 {
                    0.0
                } else {
                    (c * (self.partial[s] - self.b.total_rate(s, s))).max(0.0)
                }
            })
            .collect()
    }

    /// (1/N) sum_{i<j} Lambda(v_i, v_j)
    pub fn total_rate(&self) -> f64 {
        0.5 * self.ordered_weights().iter().sum::<f64>() / self.n_particles() as f64
    }

    fn pick(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                last = i;
            }
            acc += w;
            if u < acc {
                return i;
            }
        }
        last
    }

    fn move_particle(&mut self, i: usize, to: usize) {
        let from = self.config[i];
        if from == to {
            return;
        }
        let p = self.pos[i];
        self.members[from].swap_remove(p);
        if p < self.members[from].len() {
            let moved = self.members[from][p];
            self.pos[moved] = p;
        }
        self.pos[i] = self.members[to].len();
        self.members[to].push(i);
        self.config[i] = to;
        for s in 0..self.b.n_states() {
            self.partial[s] += self.b.total_rate(s, to) - self.b.total_rate(s, from);
        }
    }

    /// Next jump if it happens before `horizon`; otherwise the clock is set
    /// to `horizon` and `None` is returned. `None` with a zero total rate
    /// means the configuration is absorbing.
    pub fn next_event(&mut self, horizon: f64) -> Option<JumpEvent> {
        let n = self.b.n_states();
        let weights = self.ordered_weights();
        let total: f64 = weights.iter().sum();
        let rate = 0.5 * total / self.n_particles() as f64;
        if !(rate > 0.0) {
            self.time = horizon;
            return None;
        }
        let u: f64 = self.rng.gen();
        let dt = -(1.0 - u).ln() / rate;
        if self.time + dt > horizon {
            self.time = horizon;
            return None;
        }
        self.time += dt;
        let s = Self::pick(&weights, total, &mut self.rng);
        let tw: Vec<f64> = (0..n)
            .map(|t| {
                let c = self.members[t].len() as f64 - if t == s { 1.0 } else { 0.0 };
                c.max(0.0) * self.b.total_rate(s, t)
            })
            .collect();
        let t = Self::pick(&tw, tw.iter().sum(), &mut self.rng);
        let i = self.members[s][self.rng.gen_range(0..self.members[s].len())];
        let j = loop {
            let j = self.members[t][self.rng.gen_range(0..self.members[t].len())];
            if j != i {
                break j;
            }
        };
        let (a, bb) = self.b.sample_outgoing(s, t, &mut self.rng);
        self.move_particle(i, a);
        self.move_particle(j, bb);
        self.n_events += 1;
        if self.n_events % 4096 == 0 {
            self.refresh();
        }
        Some(if i < j {
            JumpEvent { time: self.time, i, j, pre: (s, t), post: (a, bb) }
        } else {
            JumpEvent { time: self.time, i: j, j: i, pre: (t, s), post: (bb, a) }
        })
    }
}

#[derive(Debug, Clone)]
pub struct KacRun {
    pub initial: Vec<usize>,
    pub events: Vec<JumpEvent>,
    pub final_config: Vec<usize>,
    /// the total rate hit zero before T
    pub absorbed: bool,
}

/// Draws N i.i.d. particles from `p0` and runs the walk on [0, T].
pub fn simulate_kac(b: &CollisionKernel, n_particles: usize, p0: &ProbabilityVector, t_end: f64, seed: u64) -> Result<KacRun> {
    simulate_replica(b, n_particles, p0, t_end, seed, 0, true)
}

fn simulate_replica(
    b: &CollisionKernel,
    n_particles: usize,
    p0: &ProbabilityVector,
    t_end: f64,
    seed: u64,
    replica: u64,
    record: bool,
) -> Result<KacRun> {
    check_dim(b.n_states(), p0.n_states())?;
    if n_particles < 2 {
        return Err(Error::Invalid(format!("N must be at least 2, got {n_particles}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Invalid(format!("T must be nonnegative, got {t_end}")));
    }
    let mut rng = replica_rng(seed, replica);
    let initial = sample_config(p0, n_particles, &mut rng);
    let mut walk = KacWalk::new(b, initial.clone(), rng)?;
    let mut events = Vec::new();
    while let Some(e) = walk.next_event(t_end) {
        if record {
            events.push(e);
        }
    }
    let absorbed = walk.total_rate() == 0.0;
    Ok(KacRun { initial, events, final_config: walk.config().to_vec(), absorbed })
}

pub fn empirical_marginal(config: &[usize], n_states: usize) -> Result<ProbabilityVector> {
    if config.is_empty() {
        return Err(Error::Invalid("empty configuration".into()));
    }
    let mut h = vec![0.0; n_states];
    for v in config {
        if *v >= n_states {
            return Err(Error::Invalid(format!("state {v} out of range for {n_states} states")));
        }
        h[*v] += 1.0;
    }
    let m = config.len() as f64;
    ProbabilityVector::new(h.into_iter().map(|x| x / m).collect())
}

fn decode(mut idx: usize, n: usize, n_particles: usize, out: &mut [usize]) {
    for i in (0..n_particles).rev() {
        out[i] = idx % n;
        idx /= n;
    }
}

fn n_configs(n: usize, n_particles: usize) -> Result<usize> {
    let mut m: usize = 1;
    for _ in 0..n_particles {
        m = m.checked_mul(n).filter(|m| *m <= MAX_CONFIGS).ok_or_else(|| {
            Error::Invalid(format!("{n}^{n_particles} configurations exceed the limit {MAX_CONFIGS}"))
        })?;
    }
    Ok(m)
}

/// y = sum_{i<j} L*_ij x on X^k, in the out-minus-in convention:
/// (L*_ij x)(v) = Lambda(v_i, v_j) x(v) - sum B(a, b, v_i, v_j) x(v[i->a, j->b]).
pub fn pair_operator_adjoint(b: &CollisionKernel, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    let n = b.n_states();
    let m = n_configs(n, k)?;
    check_dim(m, x.len())?;
    let stride: Vec<usize> = (0..k).map(|i| n.pow((k - 1 - i) as u32)).collect();
    let y = (0..m)
        .into_par_iter()
        .map(|idx| {
            let mut v = vec![0; k];
            decode(idx, n, k, &mut v);
            let mut acc = 0.0;
            for i in 0..k {
                for j in i + 1..k {
                    acc += b.total_rate(v[i], v[j]) * x[idx];
                    let base = idx - v[i] * stride[i] - v[j] * stride[j];
                    for a in 0..n {
                        for c in 0..n {
                            let bb = b.get(a, c, v[i], v[j]);
                            if bb != 0.0 {
                                acc -= bb * x[base + a * stride[i] + c * stride[j]];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(y)
}

/// Invariant law of the N-particle walk, by a dense solve up to 512
/// configurations and GMRES on the uniformized chain above that.
pub fn exact_invariant_measure(b: &CollisionKernel, n_particles: usize) -> Result<PositiveMeasure> {
    if n_particles < 2 {
        return Err(Error::Invalid(format!("N must be at least 2, got {n_particles}")));
    }
    let n = b.n_states();
    let m = n_configs(n, n_particles)?;
    let inv_n = 1.0 / n_particles as f64;
    let mut out_rate = vec![0.0; m];
    let mut v = vec![0; n_particles];
    for (idx, o) in out_rate.iter_mut().enumerate() {
        decode(idx, n, n_particles, &mut v);
        for i in 0..n_particles {
            for j in i + 1..n_particles {
                *o += inv_n * b.total_rate(v[i], v[j]);
            }
        }
    }
    let lam_max = out_rate.iter().cloned().fold(0.0, f64::max);
    if lam_max == 0.0 {
        return Err(Error::Invalid("kernel has no collisions".into()));
    }
    let g = if m <= DENSE_CONFIGS {
        let mut a = DMatrix::zeros(m, m);
        for idx in 0..m {
            let col: Vec<f64> = (0..m).map(|j| if j == idx { 1.0 } else { 0.0 }).collect();
            let y = pair_operator_adjoint(b, n_particles, &col)?;
            for (r, yr) in y.iter().enumerate() {
                a[(r, idx)] = -inv_n * yr;
            }
        }
        linalg::null_vector_dense(a)?
    } else {
        let big = 1.05 * lam_max;
        let apply = |x: &[f64], y: &mut [f64]| {
            let l = pair_operator_adjoint(b, n_particles, x).expect("sizes checked");
            for i in 0..m {
                y[i] = x[i] - inv_n * l[i] / big;
            }
        };
        linalg::stationary_gmres(m, apply, 1e-13, 100, 20_000)?.0
    };
    let l = pair_operator_adjoint(b, n_particles, &g)?;
    let res = inv_n * l.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if res > 1e-12 * lam_max.max(1.0) {
        return Err(Error::NoConvergence { iterations: 0, residual: res });
    }
    PositiveMeasure::new(g)
}

/// k-marginal of an exchangeable law on X^N (first k particles), k <= 3.
pub fn marginal(alpha: &[f64], n: usize, n_particles: usize, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > 3 || k > n_particles {
        return Err(Error::Invalid(format!("k-marginals are available for 1 <= k <= min(3, N), got k = {k}")));
    }
    let m = n_configs(n, n_particles)?;
    check_dim(m, alpha.len())?;
    let block = n.pow((n_particles - k) as u32);
    Ok(alpha.chunks(block).map(|c| c.iter().sum()).collect())
}

/// Max change of alpha under adjacent transpositions of particles.
pub fn exchangeability_defect(alpha: &[f64], n: usize, n_particles: usize) -> Result<f64> {
    let m = n_configs(n, n_particles)?;
    check_dim(m, alpha.len())?;
    let mut v = vec![0; n_particles];
    let mut worst: f64 = 0.0;
    for idx in 0..m {
        decode(idx, n, n_particles, &mut v);
        for i in 0..n_particles.saturating_sub(1) {
            v.swap(i, i + 1);
            let j = v.iter().fold(0, |acc, s| acc * n + s);
            v.swap(i, i + 1);
            worst = worst.max((alpha[idx] - alpha[j]).abs());
        }
    }
    Ok(worst)
}

/// C^{k,k+1} alpha on X^k:
/// sum_i sum_{v_{k+1}, a, c} B(v_i, v_{k+1}, a, c) alpha(v_1..v_i..v_{k+1})
///                          - B(a, c, v_i, v_{k+1}) alpha(v_1..a..c).
pub fn bbgky_operator(b: &CollisionKernel, k: usize, alpha_k1: &[f64]) -> Result<Vec<f64>> {
    let n = b.n_states();
    let m1 = n_configs(n, k + 1)?;
    check_dim(m1, alpha_k1.len())?;
    let m = m1 / n;
    let stride: Vec<usize> = (0..=k).map(|i| n.pow((k - i) as u32)).collect();
    let out = (0..m)
        .into_par_iter()
        .map(|idx| {
            let mut v = vec![0; k];
            decode(idx, n, k, &mut v);
            let mut acc = 0.0;
            for i in 0..k {
                for vk in 0..n {
                    let full = idx * n + vk;
                    acc += b.total_rate(v[i], vk) * alpha_k1[full];
                    let base = full - v[i] * stride[i] - vk;
                    for a in 0..n {
                        for c in 0..n {
                            let bb = b.get(a, c, v[i], vk);
                            if bb != 0.0 {
                                acc -= bb * alpha_k1[base + a * stride[i] + c];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(out)
}

/// Max over X^k of |sum_{i<j<=k} L*_ij alpha^(k) + (N - k) C^{k,k+1} alpha^(k+1)|.
pub fn bbgky_residual(b: &CollisionKernel, alpha: &[f64], n_particles: usize, k: usize) -> Result<f64> {
    let n = b.n_states();
    if k + 1 > n_particles || k + 1 > 3 {
        return Err(Error::Invalid(format!("hierarchy level k = {k} needs k + 1 <= min(3, N)")));
    }
    let ak = marginal(alpha, n, n_particles, k)?;
    let ak1 = marginal(alpha, n, n_particles, k + 1)?;
    let l = if k >= 2 { pair_operator_adjoint(b, k, &ak)? } else { vec![0.0; ak.len()] };
    let c = bbgky_operator(b, k, &ak1)?;
    Ok(l.iter().zip(&c).map(|(x, y)| (x + (n_particles - k) as f64 * y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosGap {
    pub n_particles: usize,
    pub n_replicas: usize,
    pub t_end: f64,
    /// TV distance between the replica-averaged empirical marginal and P_T
    pub tv: f64,
    /// bootstrap standard error of `tv` over replicas
    pub std_error: f64,
    pub empirical: Vec<f64>,
    pub boltzmann: Vec<f64>,
    pub absorbed_replicas: usize,
}

/// Replicas run in parallel on independent streams; the aggregation order
/// is fixed, so the result does not depend on scheduling.
pub fn chaos_gap(
    b: &CollisionKernel,
    n_particles: usize,
    p0: &ProbabilityVector,
    t_end: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<ChaosGap> {
    if n_replicas == 0 {
        return Err(Error::Invalid("need at least one replica".into()));
    }
    let n = b.n_states();
    let runs: Vec<Result<(Vec<f64>, bool)>> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let run = simulate_replica(b, n_particles, p0, t_end, seed, r, false)?;
            Ok((empirical_marginal(&run.final_config, n)?.into_weights(), run.absorbed))
        })
        .collect();
    let mut margs = Vec::with_capacity(n_replicas);
    let mut absorbed = 0;
    for r in runs {
        let (m, a) = r?;
        absorbed += a as usize;
        margs.push(m);
    }
    let target = if t_end > 0.0 {
        boltzmann_evolve(b, p0, t_end, 1)?.last().weights().to_vec()
    } else {
        p0.weights().to_vec()
    };
    let tv_of = |idx: &mut dyn Iterator<Item = usize>| {
        let mut avg = vec![0.0; n];
        let mut cnt = 0.0;
        for i in idx {
            avg.iter_mut().zip(&margs[i]).for_each(|(a, m)| *a += m);
            cnt += 1.0;
        }
        avg.iter_mut().for_each(|a| *a /= cnt);
        let tv = 0.5 * avg.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>();
        (tv, avg)
    };
    let (tv, empirical) = tv_of(&mut (0..n_replicas));
    let mut rng = replica_rng(seed, u64::MAX);
    let boots: Vec<f64> = (0..200)
        .map(|_| {
            let pick: Vec<usize> = (0..n_replicas).map(|_| rng.gen_range(0..n_replicas)).collect();
            tv_of(&mut pick.into_iter()).0
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64;
    Ok(ChaosGap {
        n_particles,
        n_replicas,
        t_end,
        tv,
        std_error: var.sqrt(),
        empirical,
        boltzmann: target,
        absorbed_replicas: absorbed,
    })
}
