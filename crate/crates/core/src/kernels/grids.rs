use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Uniform bins on the circle, bin m = [m w, (m + 1) w) with w = 2 pi / M.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleGrid {
    m: usize,
}

impl CircleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 || m % 2 != 0 {
            return Err(Error::Invalid(format!("circle grid needs an even M >= 8, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn n_bins(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.center(k)).collect()
    }

    /// Bin index of an angle (any real).
    pub fn bin_of(&self, theta: f64) -> usize {
        let t = theta.rem_euclid(2.0 * PI);
        ((t / self.width()).floor() as usize).min(self.m - 1)
    }

    /// Number of bins between i and j along the shorter arc.
    pub fn bin_steps(&self, i: usize, j: usize) -> usize {
        let k = (i + self.m - j) % self.m;
        k.min(self.m - k)
    }

    /// Arc-length distance of the bin centers.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.bin_steps(i, j) as f64 * self.width()
    }

    /// Midpoints of the shorter arc between the centers; two for antipodal
    /// bins, ordered by angle in [0, 2 pi).
    pub fn midpoints(&self, i: usize, j: usize) -> Vec<f64> {
        let (i, j) = (i.max(j), i.min(j));
        let (ti, tj) = (self.center(i), self.center(j));
        if 2 * self.bin_steps(i, j) == self.m {
            let mut c = [(tj + PI / 2.0).rem_euclid(2.0 * PI), (tj - PI / 2.0).rem_euclid(2.0 * PI)];
            c.sort_by(f64::total_cmp);
            c.to_vec()
        } else {
            let d = (ti - tj + PI).rem_euclid(2.0 * PI) - PI;
            vec![(tj + d / 2.0).rem_euclid(2.0 * PI)]
        }
    }

    /// Probability of each bin under the uniform law on the arc of length
    /// `a` centered at `center`; a point mass when a = 0.
    pub fn arc_masses(&self, center: f64, a: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.m];
        if a <= 0.0 {
            p[self.bin_of(center)] = 1.0;
            return p;
        }
        let w = self.width();
        let c = center.rem_euclid(2.0 * PI);
        let (lo, hi) = (c - a / 2.0, c + a / 2.0);
        let first = (lo / w).floor() as i64;
        let last = (hi / w).ceil() as i64;
        for k in first..last {
            let ov = (hi.min((k + 1) as f64 * w) - lo.max(k as f64 * w)).max(0.0);
            p[k.rem_euclid(self.m as i64) as usize] += ov / a;
        }
        p
    }
}

/// Uniform bins on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalGrid {
    m: usize,
}

impl IntervalGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Invalid(format!("interval grid needs M >= 2, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn n_bins(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> f64 {
        2.0 / self.m as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.width()
    }

    pub fn center(&self, k: usize) -> f64 {
        -1.0 + (k as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.center(k)).collect()
    }

    pub fn bin_of(&self, v: f64) -> usize {
        (((v + 1.0) / self.width()).floor().max(0.0) as usize).min(self.m - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_geometry() {
        let g = CircleGrid::new(8).unwrap();
        assert!(CircleGrid::new(7).is_err() && CircleGrid::new(6).is_err());
        assert_eq!(g.bin_steps(0, 7), 1);
        assert!((g.distance(1, 5) - PI).abs() < 1e-15);
        let m = g.midpoints(0, 7);
        assert_eq!(m.len(), 1);
        assert!(m[0].abs() < 1e-15 || (m[0] - 2.0 * PI).abs() < 1e-15);
        assert_eq!(g.midpoints(1, 5), g.midpoints(5, 1));
        assert_eq!(g.midpoints(1, 5).len(), 2);
    }

    #[test]
    fn arc_masses_are_exact_overlaps() {
        let g = CircleGrid::new(8).unwrap();
        let w = g.width();
        let p = g.arc_masses(0.0, w);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[7] - 0.5).abs() < 1e-15);
        let q = g.arc_masses(g.center(3), PI);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((q[3] - 0.25).abs() < 1e-15 && (q[1] - 0.125).abs() < 1e-15 && q[0] == 0.0);
        assert_eq!(g.arc_masses(g.center(2), 0.0)[2], 1.0);
    }

    #[test]
    fn interval_symmetric() {
        let g = IntervalGrid::new(64).unwrap();
        for k in 0..64 {
            assert!((g.center(k) + g.center(63 - k)).abs() < 1e-15);
        }
        assert_eq!(g.bin_of(1.0), 63);
        assert_eq!(g.bin_of(-1.0), 0);
    }
}
