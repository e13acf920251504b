//! One-dimensional binning shared by σ fields and gradient reports.

use crate::error::{ensure, Result};

/// Strictly increasing cell edges partitioning `[edges[0], edges[n]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
    uniform: bool,
}

impl BinEdges {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        ensure!(n >= 1, Argument, "need at least one bin");
        ensure!(lo.is_finite() && hi.is_finite() && lo < hi, Argument, "invalid bin window [{lo}, {hi}]");
        let w = (hi - lo) / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|i| lo + i as f64 * w).collect();
        edges[n] = hi;
        Ok(Self { edges, uniform: true })
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        ensure!(edges.len() >= 2, Argument, "need at least two edges");
        ensure!(
            edges.windows(2).all(|w| w[0].is_finite() && w[1].is_finite() && w[1] > w[0]),
            Argument,
            "edges must be finite and strictly increasing"
        );
        Ok(Self { edges, uniform: false })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn width(&self, j: usize) -> f64 {
        self.edges[j + 1] - self.edges[j]
    }

    pub fn center(&self, j: usize) -> f64 {
        0.5 * (self.edges[j] + self.edges[j + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }

    /// Bin containing `x` (left-closed, the last bin also right-closed).
    #[inline]
    pub fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.lo(), self.hi());
        if !(x >= lo && x <= hi) {
            return None;
        }
        let n = self.len();
        if self.uniform {
            let j = ((x - lo) / (hi - lo) * n as f64) as usize;
            Some(j.min(n - 1))
        } else {
            Some(self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1))
        }
    }

    /// Bin containing `x`, with points outside snapped to the nearest end bin.
    #[inline]
    pub fn locate_clamped(&self, x: f64) -> usize {
        if x <= self.lo() {
            0
        } else if x >= self.hi() {
            self.len() - 1
        } else {
            self.locate(x).unwrap_or(0)
        }
    }

    /// Length of `[a, b] ∩ bin j`.
    pub fn overlap(&self, j: usize, a: f64, b: f64) -> f64 {
        (b.min(self.edges[j + 1]) - a.max(self.edges[j])).max(0.0)
    }

    /// Averages a piecewise-constant function on `self` onto `target` bins.
    /// Target bins not covered by `self` receive the average over the covered
    /// part (zero if uncovered).
    pub fn rebin(&self, values: &[f64], target: &BinEdges) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        (0..target.len())
            .map(|t| {
                let (a, b) = (target.edges[t], target.edges[t + 1]);
                let mut acc = 0.0;
                let mut covered = 0.0;
                for (j, v) in values.iter().enumerate() {
                    let w = self.overlap(j, a, b);
                    if w > 0.0 {
                        acc += v * w;
                        covered += w;
                    }
                }
                if covered > 0.0 {
                    acc / covered
                } else {
                    0.0
                }
            })
            .collect()
    }
}
