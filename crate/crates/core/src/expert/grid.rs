//! Multilinear interpolation on a regular grid.
//!
//! Fitting spreads every sample over the corners of its cell with the
//! interpolation weights and stores the weighted mean target per node, so a
//! sample lying on a node is reproduced exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned grid with `points` nodes per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub lows: Vec<f64>,
    pub highs: Vec<f64>,
    pub points: usize,
}

impl GridAxes {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>, points: usize) -> Result<Self> {
        if lows.len() != highs.len() || lows.is_empty() {
            return Err(Error::Shape("grid bounds must be non-empty and of equal length".into()));
        }
        if points < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points per axis, got {points}")));
        }
        if lows.iter().zip(&highs).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Config("grid bounds must be finite with low <= high".into()));
        }
        let n_nodes = points.checked_pow(lows.len() as u32).filter(|n| *n <= 1 << 24);
        if n_nodes.is_none() {
            return Err(Error::Config("grid has too many nodes".into()));
        }
        Ok(Self { lows, highs, points })
    }

    /// Tight box around `rows`.
    pub fn enclosing<'a>(rows: impl IntoIterator<Item = &'a [f64]>, points: usize) -> Result<Self> {
        let mut lows: Vec<f64> = Vec::new();
        let mut highs: Vec<f64> = Vec::new();
        for row in rows {
            if lows.is_empty() {
                lows = row.to_vec();
                highs = row.to_vec();
                continue;
            }
            for (j, x) in row.iter().enumerate() {
                lows[j] = lows[j].min(*x);
                highs[j] = highs[j].max(*x);
            }
        }
        Self::new(lows, highs, points)
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    /// Coordinates of node `index` (first axis varies slowest).
    pub fn node(&self, mut index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for j in (0..self.dim()).rev() {
            let k = index % self.points;
            index /= self.points;
            x[j] = self.coordinate(j, k);
        }
        x
    }

    fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let t = k as f64 / (self.points - 1) as f64;
        self.lows[axis] + t * (self.highs[axis] - self.lows[axis])
    }

    /// Nodes and weights whose weighted sum interpolates at `x`. Points
    /// outside the box are clamped onto it.
    pub fn corners(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for j in 0..d {
            let span = self.highs[j] - self.lows[j];
            let u = if span > 0.0 {
                ((x[j] - self.lows[j]) / span).clamp(0.0, 1.0) * (self.points - 1) as f64
            } else {
                0.0
            };
            let k = (u.floor() as usize).min(self.points - 2);
            base[j] = k;
            frac[j] = u - k as f64;
        }
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0..(1usize << d) {
            let mut index = 0;
            let mut w = 1.0;
            for j in 0..d {
                let up = (mask >> (d - 1 - j)) & 1;
                index = index * self.points + base[j] + up;
                w *= if up == 1 { frac[j] } else { 1.0 - frac[j] };
            }
            if w > 0.0 {
                out.push((index, w));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRegressor {
    pub axes: GridAxes,
    pub values: Vec<f64>,
}

impl GridRegressor {
    /// Nodes that receive no weight take the mean target.
    pub fn fit(axes: GridAxes, x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::Shape("grid fit needs matching, non-empty inputs".into()));
        }
        let mut num = vec![0.0; axes.n_nodes()];
        let mut den = vec![0.0; axes.n_nodes()];
        for (row, target) in x.iter().zip(y) {
            for (node, w) in axes.corners(row) {
                num[node] += w * target;
                den[node] += w;
            }
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let values = num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { mean }).collect();
        Ok(Self { axes, values })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.axes.corners(x).iter().map(|(node, w)| w * self.values[*node]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_reproduced_and_linear_functions_interpolated() {
        let axes = GridAxes::new(vec![-1.0, 0.0], vec![1.0, 2.0], 5).unwrap();
        let f = |x: &[f64]| 3.0 * x[0] - 2.0 * x[1] + 1.0;
        let x: Vec<Vec<f64>> = (0..axes.n_nodes()).map(|i| axes.node(i)).collect();
        let y: Vec<f64> = x.iter().map(|p| f(p)).collect();
        let g = GridRegressor::fit(axes, &x, &y).unwrap();
        for (p, t) in x.iter().zip(&y) {
            assert!((g.predict(p) - t).abs() < 1e-12);
        }
        for p in [[0.13, 0.77], [-0.99, 1.99], [0.5, 0.5]] {
            assert!((g.predict(&p) - f(&p)).abs() < 1e-12);
        }
        assert!((g.predict(&[5.0, 0.0]) - f(&[1.0, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn corner_weights_sum_to_one() {
        let axes = GridAxes::new(vec![0.0; 3], vec![1.0; 3], 4).unwrap();
        for p in [[0.1, 0.5, 0.9], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.33, 0.66, 0.99]] {
            let s: f64 = axes.corners(&p).iter().map(|c| c.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_nodes_fall_back_to_the_mean() {
        let axes = GridAxes::new(vec![0.0], vec![1.0], 11).unwrap();
        let g = GridRegressor::fit(axes, &[vec![0.0], vec![0.1]], &[1.0, 3.0]).unwrap();
        assert_eq!(g.predict(&[0.9]), 2.0);
    }

    #[test]
    fn invalid_axes() {
        assert!(GridAxes::new(vec![0.0], vec![1.0], 1).is_err());
        assert!(GridAxes::new(vec![1.0], vec![0.0], 3).is_err());
        assert!(GridAxes::new(vec![0.0; 8], vec![1.0; 8], 100).is_err());
    }
}
