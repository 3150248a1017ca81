//! Linear-algebra plumbing for stationary measures: sparse matrices,
//! dense null vectors, restarted GMRES and power iteration.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().cloned().zip(self.values[a..b].iter().cloned())
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// y = A^T x
    pub fn mul_vec_transposed(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            self.row(i).filter(|(_, v)| *v > 0.0).map(move |(j, _)| (i, j))
        })
    }
}

/// Strongly connected components of the directed graph, each sorted, ordered
/// by smallest member.
pub fn communicating_classes(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (a, b) in edges {
        if a != b {
            g.add_edge(nodes[a], nodes[b], ());
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    classes.sort();
    classes
}

/// Solves A x = 0, sum x = 1 for a singular A of corank one (replacing the
/// last equation by the normalization).
pub fn null_vector_dense(mut a: DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::NoConvergence { iterations: 0, residual: f64::INFINITY })?;
    Ok(normalize_clamped(x.iter().cloned().collect()))
}

pub(crate) fn normalize_clamped(mut x: Vec<f64>) -> Vec<f64> {
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Stationary vector g = T^T g of a stochastic matrix given by its transposed
/// action, via restarted GMRES on (I - T^T + 1 1^T / n) g = 1 / n.
pub fn stationary_gmres<F>(n: usize, apply_t_transposed: F, tol: f64, restart: usize, max_iter: usize) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let inv_n = 1.0 / n as f64;
    let op = |x: &[f64], y: &mut [f64]| {
        apply_t_transposed(x, y);
        let s: f64 = x.iter().sum::<f64>() * inv_n;
        for i in 0..n {
            y[i] = x[i] - y[i] + s;
        }
    };
    let b = vec![inv_n; n];
    let bnorm = norm(&b);
    let mut x = vec![inv_n; n];
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut total = 0;
    loop {
        op(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok((normalize_clamped(x), total));
        }
        if total >= max_iter {
            return Err(Error::NoConvergence { iterations: total, residual: beta / bnorm });
        }
        let m = restart.min(n);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![0.0; n];
            op(&v[k], &mut w);
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(&w, vj);
                h[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(a, b)| *a -= hjk * b);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= 0.1 * tol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(a, b)| *a += yj * b);
        }
    }
}

/// Power iteration g <- T^T g from the uniform vector, stopping when the
/// one-step change in L1 falls below `tol`.
pub fn stationary_power<F>(n: usize, apply_t_transposed: F, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    for it in 1..=max_iter {
        apply_t_transposed(&x, &mut y);
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
        let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut y);
        if d < tol {
            return Ok((x, it));
        }
    }
    let mut y2 = vec![0.0; n];
    apply_t_transposed(&x, &mut y2);
    let residual = x.iter().zip(&y2).map(|(a, b)| (a - b).abs()).sum();
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Csr {
        // 3-state chain with stationary vector (1, 3, 1) / 5
        Csr::from_triplets(
            3,
            3,
            vec![(0, 0, 0.25), (0, 1, 0.75), (1, 0, 0.25), (1, 2, 0.25), (1, 1, 0.5), (2, 1, 0.75), (2, 2, 0.25)],
        )
    }

    #[test]
    fn gmres_and_power_agree_with_dense() {
        let t = chain();
        let mut dense = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for (j, v) in t.row(i) {
                dense[(j, i)] += v;
            }
            dense[(i, i)] -= 1.0;
        }
        let d = null_vector_dense(dense).unwrap();
        let (g, _) = stationary_gmres(3, |x, y| t.mul_vec_transposed(x, y), 1e-14, 10, 100).unwrap();
        let (p, _) = stationary_power(3, |x, y| t.mul_vec_transposed(x, y), 1e-15, 10_000).unwrap();
        for i in 0..3 {
            assert!((d[i] - g[i]).abs() < 1e-13);
            assert!((d[i] - p[i]).abs() < 1e-12);
        }
        assert!((d[0] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn duplicate_triplets_sum() {
        let a = Csr::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]);
        assert_eq!(a.nnz(), 2);
        let mut y = [0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, [3.0, 1.0]);
    }

    #[test]
    fn classes() {
        let c = communicating_classes(4, [(0, 1), (1, 0), (2, 3)].into_iter());
        assert_eq!(c, vec![vec![0, 1], vec![2], vec![3]]);
    }
}
