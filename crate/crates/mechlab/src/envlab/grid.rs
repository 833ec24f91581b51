use serde::Serialize;

use crate::error::{Error, Result};

/// Sparse quadrature weights over a contiguous run of grid nodes, divided by a
/// common normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    start: usize,
    values: Vec<f64>,
    norm: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { start: 0, values: Vec::new(), norm: 1.0 }
    }
}

impl Weights {
    pub fn new(start: usize, values: Vec<f64>) -> Self {
        Self { start, values, norm: 1.0 }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Raw weights before the normalizer is applied.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let norm = self.norm;
        self.values.iter().enumerate().map(move |(k, &w)| (self.start + k, w / norm))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.norm
    }

    /// `Σ w_j g_j`; the sum is formed before dividing by the normalizer so that
    /// normalized weights reproduce constants exactly.
    pub fn dot(&self, g: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&g[self.start..self.start + self.values.len()])
            .map(|(w, v)| w * v)
            .sum::<f64>()
            / self.norm
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.values.iter_mut().for_each(|w| *w *= k);
        self
    }

    /// Divides every weight by `d`.
    pub fn divided_by(mut self, d: f64) -> Self {
        self.norm *= d;
        self
    }

    /// Multiplies each weight by `f(node)`.
    pub fn weighted_by(mut self, f: impl Fn(usize) -> f64) -> Self {
        let start = self.start;
        self.values
            .iter_mut()
            .enumerate()
            .for_each(|(k, w)| *w *= f(start + k));
        self
    }

    /// Dense copy over `n` nodes.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (j, w) in self.iter() {
            out[j] = w;
        }
        out
    }
}

/// Strictly increasing state nodes for one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodGrid {
    period: usize,
    points: Vec<f64>,
}

impl PeriodGrid {
    /// `nodes` equally spaced points on `[lo, hi]`; the last point is `hi` exactly.
    pub fn uniform(period: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Degenerate(format!(
                "period {period}: state interval [{lo}, {hi}] is empty"
            )));
        }
        if nodes < 3 {
            return Err(Error::Degenerate(format!(
                "period {period}: a grid needs at least 3 nodes, got {nodes}"
            )));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let points = (0..nodes)
            .map(|k| if k + 1 == nodes { hi } else { lo + k as f64 * h })
            .collect();
        Ok(Self { period, points })
    }

    pub fn from_points(period: usize, points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!(
                "period {period}: a grid needs at least 3 nodes"
            )));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Degenerate(format!(
                "period {period}: grid points must be finite and strictly increasing"
            )));
        }
        Ok(Self { period, points })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn top(&self) -> usize {
        self.points.len() - 1
    }

    /// Cell index `k` (so `x` lies in `[p_k, p_{k+1}]`) and the fraction within it,
    /// clamped to the grid.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        locate(&self.points, x)
    }

    /// Linear interpolation of node values; constant beyond the ends.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        interpolate(&self.points, values, x)
    }

    /// Nearest node to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let (k, f) = self.locate(x);
        if f > 0.5 {
            k + 1
        } else {
            k
        }
    }

    /// Weights `w` with `sum_j w_j g_j` equal to the integral of the interpolant of `g`
    /// over `[a, b]`; mass outside the grid lands on the end nodes.
    pub fn segment_weights(&self, a: f64, b: f64) -> Weights {
        if a.is_nan() || b.is_nan() || b <= a {
            return Weights::empty();
        }
        let p = &self.points;
        let n = p.len();
        let (lo, hi) = (self.lo(), self.hi());
        let below = if a < lo { b.min(lo) - a } else { 0.0 };
        let above = if b > hi { b - a.max(hi) } else { 0.0 };
        let (l0, r0) = (a.max(lo), b.min(hi));

        let (first, last) = if r0 > l0 {
            let (ka, _) = self.locate(l0);
            let (kb, _) = self.locate(r0);
            (ka, kb + 1)
        } else if a >= hi {
            (n - 1, n - 1)
        } else {
            (0, 0)
        };
        let first = if below > 0.0 { 0 } else { first };
        let last = if above > 0.0 { n - 1 } else { last };
        let mut values = vec![0.0; last - first + 1];
        if r0 > l0 {
            let (ka, _) = self.locate(l0);
            let (kb, _) = self.locate(r0);
            for k in ka..=kb.min(n - 2) {
                let l = l0.max(p[k]);
                let r = r0.min(p[k + 1]);
                if r <= l {
                    continue;
                }
                let h = p[k + 1] - p[k];
                let len = r - l;
                values[k - first] += len * ((p[k + 1] - l) + (p[k + 1] - r)) / (2.0 * h);
                values[k + 1 - first] += len * ((l - p[k]) + (r - p[k])) / (2.0 * h);
            }
        }
        values[0] += below;
        let m = values.len() - 1;
        values[m] += above;
        Weights::new(first, values)
    }

    /// Trapezoid weights over the whole grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        self.segment_weights(self.lo(), self.hi()).to_dense(self.len())
    }

    /// Running trapezoid integral of node values from the bottom node.
    pub fn cumulative_integral(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..self.points.len() {
            acc += 0.5 * (self.points[k] - self.points[k - 1]) * (values[k] + values[k - 1]);
            out.push(acc);
        }
        out
    }

    /// Integral of the interpolant of `values` from the bottom node to `x`
    /// (negative below the grid).
    pub fn integral_to(&self, values: &[f64], x: f64) -> f64 {
        if x <= self.lo() {
            return -(self.lo() - x) * values[0];
        }
        self.integral_with(values, &self.cumulative_integral(values), x)
    }

    /// [`Self::integral_to`] reusing a precomputed [`Self::cumulative_integral`].
    pub fn integral_with(&self, values: &[f64], cumulative: &[f64], x: f64) -> f64 {
        if x <= self.lo() {
            return -(self.lo() - x) * values[0];
        }
        if x >= self.hi() {
            return cumulative[self.top()] + (x - self.hi()) * values[self.top()];
        }
        let (k, _) = self.locate(x);
        let vx = self.interpolate(values, x);
        cumulative[k] + 0.5 * (x - self.points[k]) * (values[k] + vx)
    }
}

pub(crate) fn locate(points: &[f64], x: f64) -> (usize, f64) {
    let n = points.len();
    if n < 2 || x <= points[0] {
        return (0, 0.0);
    }
    if x >= points[n - 1] {
        return (n - 2, 1.0);
    }
    let k = (points.partition_point(|p| *p <= x) - 1).min(n - 2);
    (k, (x - points[k]) / (points[k + 1] - points[k]))
}

pub(crate) fn interpolate(points: &[f64], values: &[f64], x: f64) -> f64 {
    if points.len() == 1 {
        return values[0];
    }
    let (k, f) = locate(points, x);
    if f == 0.0 {
        values[k]
    } else if f == 1.0 {
        values[k + 1]
    } else {
        values[k] + f * (values[k + 1] - values[k])
    }
}
