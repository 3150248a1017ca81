//! Classical RK4 with step-doubling error control.

use crate::error::{Error, Result};

/// Local (per accepted step) absolute error tolerance.
pub const LOCAL_TOL: f64 = 1e-10;
/// Most negative weight tolerated after a step before it is clamped to 0.
pub const NEG_TOL: f64 = 1e-12;

fn rk4_step<F: Fn(f64, &[f64], &mut [f64])>(f: &F, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Advances `y` from `t0` to `t1` (either direction). `h` carries the step
/// size guess between calls.
pub fn advance<F>(f: &F, y: &mut Vec<f64>, t0: f64, t1: f64, h: &mut f64, tol: f64) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(());
    }
    let dir = span.signum();
    let n = y.len();
    let mut full = vec![0.0; n];
    let mut half = vec![0.0; n];
    let mut two = vec![0.0; n];
    let mut t = t0;
    let h_min = 1e-14 * span.abs().max(1.0);
    if !(*h > 0.0) {
        *h = span.abs();
    }
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        let step = h.min((t1 - t) * dir);
        let hs = step * dir;
        rk4_step(f, t, y, hs, &mut full);
        rk4_step(f, t, y, 0.5 * hs, &mut half);
        rk4_step(f, t + 0.5 * hs, &half, 0.5 * hs, &mut two);
        let err = full
            .iter()
            .zip(&two)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / 15.0;
        if !err.is_finite() {
            return Err(Error::StepFailure { t, reason: "non-finite state".into() });
        }
        if err <= tol {
            for i in 0..n {
                y[i] = two[i] + (two[i] - full[i]) / 15.0;
            }
            t = if step == (t1 - t) * dir { t1 } else { t + hs };
            let grow = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).powf(0.2)).min(4.0) };
            // keep the guess when the step was truncated by the interval end
            if step == *h || grow < 1.0 {
                *h = step * grow.max(1.0);
            }
        } else {
            *h = step * (0.9 * (tol / err).powf(0.2)).max(0.1);
            if *h < h_min {
                return Err(Error::StepFailure { t, reason: format!("step size underflow (error {err:e})") });
            }
        }
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::StepFailure { t, reason: "too many steps".into() });
        }
    }
    Ok(())
}

/// Output of [`integrate_on_simplex`].
#[derive(Debug, Clone)]
pub struct SimplexRun {
    /// State at every grid point, renormalized.
    pub states: Vec<Vec<f64>>,
    /// Exact time average of the state over every cell.
    pub cell_means: Vec<Vec<f64>>,
    /// Time average of the outer product P (x) P over every cell, if requested.
    pub pair_means: Option<Vec<Vec<f64>>>,
    /// Largest |mass - 1| seen before renormalization.
    pub max_drift: f64,
}

/// Integrates a mass-conserving ODE on the simplex over `t_grid`.
///
/// Cell averages are integrated alongside the state as extra components, so
/// they carry the same error control. Each output state is checked for
/// negativity and renormalized.
pub fn integrate_on_simplex<F>(f: F, p0: &[f64], t_grid: &[f64], with_pairs: bool) -> Result<SimplexRun>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p0.len();
    let width = if with_pairs { 2 * n + n * n } else { 2 * n };
    let g = |_t: f64, y: &[f64], out: &mut [f64]| {
        let (p, rest) = out.split_at_mut(n);
        f(&y[..n], p);
        rest[..n].copy_from_slice(&y[..n]);
        if with_pairs {
            for a in 0..n {
                for b in 0..n {
                    rest[n + a * n + b] = y[a] * y[b];
                }
            }
        }
    };
    let mut states = Vec::with_capacity(t_grid.len());
    let mut cell_means = Vec::with_capacity(t_grid.len().saturating_sub(1));
    let mut pair_means = if with_pairs { Some(Vec::new()) } else { None };
    let mut y = vec![0.0; width];
    y[..n].copy_from_slice(p0);
    states.push(p0.to_vec());
    let mut h = 0.0;
    let mut max_drift: f64 = 0.0;
    for w in t_grid.windows(2) {
        y[n..].iter_mut().for_each(|v| *v = 0.0);
        advance(&g, &mut y, w[0], w[1], &mut h, LOCAL_TOL)?;
        let p = &mut y[..n];
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -NEG_TOL {
            return Err(Error::StepFailure { t: w[1], reason: format!("negative weight {min:e}") });
        }
        p.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = p.iter().sum();
        max_drift = max_drift.max((s - 1.0).abs());
        p.iter_mut().for_each(|v| *v /= s);
        states.push(p.to_vec());
        let dt = w[1] - w[0];
        cell_means.push(y[n..2 * n].iter().map(|v| (v / dt).max(0.0)).collect());
        if let Some(pm) = pair_means.as_mut() {
            pm.push(y[2 * n..].iter().map(|v| (v / dt).max(0.0)).collect());
        }
    }
    Ok(SimplexRun { states, cell_means, pair_means, max_drift })
}

/// Uniform grid of `n_steps + 1` points on [0, T].
pub fn uniform_grid(t_end: f64, n_steps: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Invalid(format!("T must be positive, got {t_end}")));
    }
    if n_steps == 0 {
        return Err(Error::Invalid("n_steps must be at least 1".into()));
    }
    Ok((0..=n_steps).map(|k| t_end * k as f64 / n_steps as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -3.0 * y[0];
        let mut y = vec![1.0];
        let mut h = 0.0;
        advance(&f, &mut y, 0.0, 2.0, &mut h, 1e-12).unwrap();
        assert!((y[0] - (-6f64).exp()).abs() < 1e-11);
        // and backwards
        advance(&f, &mut y, 2.0, 0.0, &mut h, 1e-12).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(uniform_grid(0.0, 10).is_err());
        assert!(uniform_grid(1.0, 0).is_err());
        assert_eq!(uniform_grid(1.0, 4).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
