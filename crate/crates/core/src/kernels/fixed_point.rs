//! Numerical oracle for the Kuramoto collision rates: the translation
//! invariant stationary density h(xi) of the two-particle chain.
//!
//! Both variants have the form
//!
//! ```text
//! h(xi) = S (pi - xi) N[h] + kappa * int_{max(xi, x0)}^pi (t - xi) / t^2 h(t) dt
//! ```
//!
//! with a rank-one part N[h] and a Volterra part. Inverse iteration at
//! shift 1 solves (I - Volterra) h = rank-one part, which is a backward sweep
//! of the integrals I1 = int h/t and I2 = int h/t^2, so a single step gives
//! the eigenfunction; the consistency N[u] = 1 is reported as `eigenvalue`.

use super::kuramoto::{KuramotoModel, KuramotoVariant};
use crate::error::{Error, Result};
use crate::integrate::advance;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct HTable {
    /// cell midpoints (k + 1/2) pi / M
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    /// h' at the same points
    pub dh: Vec<f64>,
    /// C for variant A, K for variant B, in the normalization of the closed forms
    pub normalization: f64,
    /// N[u] for the unnormalized sweep; 1 for an exact eigenfunction
    pub eigenvalue: f64,
}

impl HTable {
    /// h'(pi), from the equation
    pub fn slope_at_pi(&self) -> f64 {
        *self.dh.last().expect("nonempty table")
    }

    pub fn sup_error(&self, exact: impl Fn(f64) -> f64, exclude: impl Fn(f64) -> bool) -> f64 {
        self.xi
            .iter()
            .zip(&self.h)
            .filter(|(x, _)| !exclude(**x))
            .map(|(x, h)| (h - exact(*x)).abs())
            .fold(0.0, f64::max)
    }
}

struct Sweep {
    s: f64,
    kappa: f64,
}

impl Sweep {
    fn u(&self, x: f64, y: &[f64]) -> f64 {
        self.s * (PI - x) + self.kappa * (y[0] - x * y[1])
    }

    /// (I1, I2, I3 = int u) at each target, targets descending in (0, pi].
    fn run(&self, targets: &[f64]) -> Result<Vec<[f64; 3]>> {
        let f = |t: f64, y: &[f64], out: &mut [f64]| {
            let x = t.exp();
            let u = self.u(x, y);
            out[0] = -u;
            out[1] = -u / x;
            out[2] = -u * x;
        };
        let mut y = vec![0.0; 3];
        let mut t = PI.ln();
        let mut h = 0.0;
        let mut out = Vec::with_capacity(targets.len());
        for x in targets {
            let t1 = x.ln();
            let scale = y.iter().fold(1.0f64, |m: f64, v: &f64| m.max(v.abs()));
            advance(&f, &mut y, t, t1, &mut h, 1e-13 * scale)?;
            t = t1;
            out.push([y[0], y[1], y[2]]);
        }
        Ok(out)
    }
}

fn midpoints(m: usize) -> Vec<f64> {
    (0..m).map(|k| (k as f64 + 0.5) * PI / m as f64).collect()
}

/// Tabulates h at the M_xi cell midpoints of [0, pi].
pub fn solve_h_fixed_point(model: &KuramotoModel, m_xi: usize) -> Result<HTable> {
    if m_xi < 4 {
        return Err(Error::Invalid(format!("M_xi must be at least 4, got {m_xi}")));
    }
    let xs = midpoints(m_xi);
    match model.variant() {
        KuramotoVariant::A { delta } => {
            // raw sweep with C = 1; the closed form has C = 1 / pi^2
            let sw = Sweep { s: 2.0, kappa: 2.0 };
            let mut targets: Vec<f64> = xs.iter().rev().cloned().filter(|x| *x >= delta).collect();
            targets.push(delta);
            targets.dedup();
            let ys = sw.run(&targets)?;
            let at_delta = *ys.last().unwrap();
            let scale = 1.0 / (PI * PI);
            let (mut h, mut dh) = (Vec::with_capacity(m_xi), Vec::with_capacity(m_xi));
            for x in &xs {
                let y = if *x >= delta {
                    ys[targets.iter().position(|t| t == x).unwrap()]
                } else {
                    at_delta
                };
                h.push(scale * sw.u(*x, &y));
                dh.push(scale * (-sw.s - sw.kappa * y[1]));
            }
            let (u0, ud) = (sw.u(0.0, &at_delta), sw.u(delta, &at_delta));
            let eigenvalue = 0.5 * delta * (u0 + ud) / (PI * PI);
            Ok(HTable { xi: xs, h, dh, normalization: scale, eigenvalue })
        }
        KuramotoVariant::B { epsilon } => {
            let r = model.r().expect("variant B");
            let sw = Sweep { s: 2.0 * epsilon, kappa: 2.0 * (1.0 - epsilon) };
            let desc: Vec<f64> = xs.iter().rev().cloned().collect();
            let ys = sw.run(&desc)?;
            let k_norm = 1.0 / (2.0 * epsilon * PI);
            let mut h = vec![0.0; m_xi];
            let mut dh = vec![0.0; m_xi];
            for (k, y) in ys.iter().enumerate() {
                let i = m_xi - 1 - k;
                h[i] = k_norm * sw.u(xs[i], y);
                dh[i] = k_norm * (-sw.s - sw.kappa * y[1]);
            }
            // below the first midpoint u = a x^-r + b x^(1+r) exactly
            let x0 = xs[0];
            let y0 = ys.last().unwrap();
            let (u0, du0) = (sw.u(x0, y0), -sw.s - sw.kappa * y0[1]);
            let det = -(1.0 + r) * x0.powf(r) * x0.powf(-r) - r * x0.powf(-r - 1.0) * x0.powf(1.0 + r);
            let a = (-(1.0 + r) * x0.powf(r) * u0 + x0.powf(1.0 + r) * du0) / det;
            let b = (u0 - a * x0.powf(-r)) / x0.powf(1.0 + r);
            let tail = a * x0.powf(1.0 - r) / (1.0 - r) + b * x0.powf(2.0 + r) / (2.0 + r);
            let eigenvalue = (y0[2] + tail) / (PI * PI);
            Ok(HTable { xi: xs, h, dh, normalization: k_norm, eigenvalue })
        }
    }
}

/// Second route: midpoint Nystrom discretization of the full integral
/// operator, leading eigenvector by power iteration.
pub fn nystrom_h(model: &KuramotoModel, m_xi: usize, max_iter: usize) -> Result<HTable> {
    if m_xi < 4 {
        return Err(Error::Invalid(format!("M_xi must be at least 4, got {m_xi}")));
    }
    let xs = midpoints(m_xi);
    let w = PI / m_xi as f64;
    let kernel = |x: f64, t: f64| -> f64 {
        match model.variant() {
            KuramotoVariant::A { delta } => {
                let a = if t < delta { PI } else { t };
                2.0 * (a - x).max(0.0) / (a * a)
            }
            KuramotoVariant::B { epsilon } => {
                2.0 * (1.0 - epsilon) * (t - x).max(0.0) / (t * t) + 2.0 * epsilon * (PI - x) / (PI * PI)
            }
        }
    };
    let k: Vec<f64> = xs.iter().flat_map(|x| xs.iter().map(move |t| kernel(*x, *t) * w)).collect();
    let mut v = vec![1.0 / m_xi as f64; m_xi];
    let mut next = vec![0.0; m_xi];
    let (mut prev_diff, mut ratio) = (f64::INFINITY, f64::NAN);
    let mut converged = false;
    let mut mu = 0.0;
    for _ in 0..max_iter {
        for (i, o) in next.iter_mut().enumerate() {
            *o = k[i * m_xi..(i + 1) * m_xi].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        mu = next.iter().sum::<f64>() / v.iter().sum::<f64>();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ratio = diff / prev_diff;
        prev_diff = diff;
        std::mem::swap(&mut v, &mut next);
        if diff < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        // |lambda_2 / lambda_1| estimated from the contraction of the updates
        return Err(Error::NoConvergence { iterations: max_iter, residual: ratio });
    }
    let (norm, target) = match model.variant() {
        KuramotoVariant::A { delta } => (xs.iter().zip(&v).filter(|(x, _)| **x < delta).map(|(_, h)| h * w).sum::<f64>(), 1.0),
        KuramotoVariant::B { epsilon } => (v.iter().sum::<f64>() * w, PI / (2.0 * epsilon)),
    };
    let h: Vec<f64> = v.iter().map(|x| x * target / norm).collect();
    let mut dh = vec![0.0; m_xi];
    for i in 0..m_xi {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(m_xi - 1));
        dh[i] = (h[b] - h[a]) / (xs[b] - xs[a]);
    }
    let normalization = match model.variant() {
        KuramotoVariant::A { .. } => 1.0 / (PI * PI),
        KuramotoVariant::B { epsilon } => 1.0 / (2.0 * epsilon * PI),
    };
    Ok(HTable { xi: xs, h, dh, normalization, eigenvalue: mu })
}
