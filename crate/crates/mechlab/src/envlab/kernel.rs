use serde::Serialize;

use super::grid::{interpolate, locate, PeriodGrid, Weights};
use crate::error::{Error, Result};

/// Next state `state * θ + allocation * a + ω` with `ω ~ U[0, width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineUniform {
    pub state: f64,
    pub allocation: f64,
    pub width: f64,
}

impl AffineUniform {
    pub fn shift(&self, theta: f64, a: f64) -> f64 {
        self.state * theta + self.allocation * a
    }
}

/// Conditional density table over (previous state, previous allocation, next state),
/// interpolated bilinearly in the conditioning pair and linearly in the next state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularKernel {
    state_nodes: Vec<f64>,
    alloc_nodes: Vec<f64>,
    support: PeriodGrid,
    /// Row-major `[state][alloc][next]`, each row integrating to 1.
    density: Vec<f64>,
    finite_difference: bool,
}

impl TabularKernel {
    /// Rows are renormalized so each integrates to one over `next_nodes`.
    pub fn new(
        state_nodes: Vec<f64>,
        alloc_nodes: Vec<f64>,
        next_nodes: Vec<f64>,
        rows: Vec<Vec<Vec<f64>>>,
        finite_difference: bool,
    ) -> Result<Self> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&state_nodes) || !increasing(&alloc_nodes) {
            return Err(Error::Schema(
                "tabular kernel conditioning nodes must be non-empty and increasing".into(),
            ));
        }
        let support = PeriodGrid::from_points(0, next_nodes)?;
        if rows.len() != state_nodes.len() {
            return Err(Error::Schema(format!(
                "tabular kernel has {} state rows for {} state nodes",
                rows.len(),
                state_nodes.len()
            )));
        }
        let trap = support.trapezoid_weights();
        let mut density = Vec::with_capacity(state_nodes.len() * alloc_nodes.len() * support.len());
        for (s, by_alloc) in rows.iter().enumerate() {
            if by_alloc.len() != alloc_nodes.len() {
                return Err(Error::Schema(format!(
                    "tabular kernel state row {s} has {} allocation rows, expected {}",
                    by_alloc.len(),
                    alloc_nodes.len()
                )));
            }
            for (a, row) in by_alloc.iter().enumerate() {
                if row.len() != support.len() {
                    return Err(Error::Schema(format!(
                        "tabular kernel row ({s}, {a}) has {} entries, expected {}",
                        row.len(),
                        support.len()
                    )));
                }
                if row.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                    return Err(Error::Schema(format!(
                        "tabular kernel row ({s}, {a}) has a negative or non-finite density"
                    )));
                }
                let mass: f64 = row.iter().zip(&trap).map(|(d, w)| d * w).sum();
                if mass <= 0.0 {
                    return Err(Error::Degenerate(format!("tabular kernel row ({s}, {a}) has no mass")));
                }
                density.extend(row.iter().map(|d| d / mass));
            }
        }
        Ok(Self { state_nodes, alloc_nodes, support, density, finite_difference })
    }

    pub fn support_grid(&self) -> &PeriodGrid {
        &self.support
    }

    pub fn state_nodes(&self) -> &[f64] {
        &self.state_nodes
    }

    pub fn alloc_nodes(&self) -> &[f64] {
        &self.alloc_nodes
    }

    /// Stored (normalized) row at conditioning node pair `(s, a)`.
    pub fn stored_row(&self, s: usize, a: usize) -> &[f64] {
        let m = self.support.len();
        let start = (s * self.alloc_nodes.len() + a) * m;
        &self.density[start..start + m]
    }

    /// Interpolated density row over the support nodes.
    pub fn row(&self, theta: f64, a: f64) -> Vec<f64> {
        let (s0, s1, fs) = bracket(&self.state_nodes, theta);
        let (a0, a1, fa) = bracket(&self.alloc_nodes, a);
        let corners = [
            (s0, a0, (1.0 - fs) * (1.0 - fa)),
            (s0, a1, (1.0 - fs) * fa),
            (s1, a0, fs * (1.0 - fa)),
            (s1, a1, fs * fa),
        ];
        let mut out = vec![0.0; self.support.len()];
        for (s, a, w) in corners {
            if w == 0.0 {
                continue;
            }
            for (o, d) in out.iter_mut().zip(self.stored_row(s, a)) {
                *o += w * d;
            }
        }
        out
    }

    pub fn density(&self, x: f64, theta: f64, a: f64) -> f64 {
        if x < self.support.lo() || x > self.support.hi() {
            return 0.0;
        }
        self.support.interpolate(&self.row(theta, a), x)
    }

    pub fn cdf(&self, x: f64, theta: f64, a: f64) -> f64 {
        if x <= self.support.lo() {
            return 0.0;
        }
        if x >= self.support.hi() {
            return 1.0;
        }
        self.support.integral_to(&self.row(theta, a), x).clamp(0.0, 1.0)
    }

    pub fn has_finite_difference(&self) -> bool {
        self.finite_difference
    }
}

fn bracket(nodes: &[f64], x: f64) -> (usize, usize, f64) {
    if nodes.len() == 1 {
        return (0, 0, 0.0);
    }
    let (k, f) = locate(nodes, x);
    (k, k + 1, f)
}

/// Transition law `K_{t+1}(θ_t, a_t)` of the next period's state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionKernel {
    AffineUniform(AffineUniform),
    Tabular(TabularKernel),
}

impl TransitionKernel {
    pub fn affine_uniform(state: f64, allocation: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || !state.is_finite() || !allocation.is_finite() {
            return Err(Error::Schema(format!(
                "affine-uniform kernel needs finite coefficients and width > 0, got width {width}"
            )));
        }
        Ok(Self::AffineUniform(AffineUniform { state, allocation, width }))
    }

    /// `F(x | θ, a)`.
    pub fn cdf(&self, x: f64, theta: f64, a: f64) -> f64 {
        match self {
            Self::AffineUniform(k) => ((x - k.shift(theta, a)) / k.width).clamp(0.0, 1.0),
            Self::Tabular(k) => k.cdf(x, theta, a),
        }
    }

    /// `F(x | θ, a)` at every `x` in `xs`.
    pub fn cdf_on(&self, xs: &[f64], theta: f64, a: f64) -> Vec<f64> {
        match self {
            Self::AffineUniform(_) => xs.iter().map(|&x| self.cdf(x, theta, a)).collect(),
            Self::Tabular(k) => {
                let row = k.row(theta, a);
                let cumulative = k.support.cumulative_integral(&row);
                xs.iter()
                    .map(|&x| {
                        if x <= k.support.lo() {
                            0.0
                        } else if x >= k.support.hi() {
                            1.0
                        } else {
                            k.support.integral_with(&row, &cumulative, x).clamp(0.0, 1.0)
                        }
                    })
                    .collect()
            }
        }
    }

    /// `f(x | θ, a)`.
    pub fn density(&self, x: f64, theta: f64, a: f64) -> f64 {
        match self {
            Self::AffineUniform(k) => {
                let s = k.shift(theta, a);
                if x >= s && x <= s + k.width {
                    1.0 / k.width
                } else {
                    0.0
                }
            }
            Self::Tabular(k) => k.density(x, theta, a),
        }
    }

    /// Support of the next state given `(θ, a)`.
    pub fn support(&self, theta: f64, a: f64) -> (f64, f64) {
        match self {
            Self::AffineUniform(k) => {
                let s = k.shift(theta, a);
                (s, s + k.width)
            }
            Self::Tabular(k) => (k.support.lo(), k.support.hi()),
        }
    }

    /// Interval-arithmetic hull of the support over a box of conditioning pairs.
    pub fn support_envelope(&self, states: (f64, f64), allocations: (f64, f64)) -> (f64, f64) {
        match self {
            Self::AffineUniform(k) => {
                let span = |c: f64, (lo, hi): (f64, f64)| {
                    let (p, q) = (c * lo, c * hi);
                    (p.min(q), p.max(q))
                };
                let (s_lo, s_hi) = span(k.state, states);
                let (a_lo, a_hi) = span(k.allocation, allocations);
                (s_lo + a_lo, s_hi + a_hi + k.width)
            }
            Self::Tabular(k) => (k.support.lo(), k.support.hi()),
        }
    }

    /// Normalized quadrature weights on `next` for `E[g(θ') | θ, a]`; with `cut`,
    /// only the part of the law above `cut` is kept (same normalization).
    pub fn weights(&self, next: &PeriodGrid, theta: f64, a: f64, cut: Option<f64>) -> Weights {
        match self {
            Self::AffineUniform(k) => {
                let s = k.shift(theta, a);
                let full = next.segment_weights(s, s + k.width);
                let mass = full.total();
                match cut {
                    None => full.divided_by(mass),
                    Some(c) => next.segment_weights(s.max(c), s + k.width).divided_by(mass),
                }
            }
            Self::Tabular(k) => {
                let row = k.row(theta, a);
                let dens = |j: usize| {
                    let x = next.point(j);
                    if x < k.support.lo() || x > k.support.hi() {
                        0.0
                    } else {
                        k.support.interpolate(&row, x)
                    }
                };
                let full = next.segment_weights(next.lo(), next.hi()).weighted_by(dens);
                let mass = full.total();
                match cut {
                    None => full.divided_by(mass),
                    Some(c) => next
                        .segment_weights(c.max(next.lo()), next.hi())
                        .weighted_by(dens)
                        .divided_by(mass),
                }
            }
        }
    }

    /// Weights `m` with `sum_j m_j g_j ≈ -∫ g(x) ∂F(x|θ,a)/∂θ dx` (allocation held fixed),
    /// optionally restricted to `x > cut`.
    pub fn impulse_weights(&self, next: &PeriodGrid, theta: f64, a: f64, cut: Option<f64>) -> Result<Weights> {
        match self {
            Self::AffineUniform(k) => Ok(self.weights(next, theta, a, cut).scaled(k.state)),
            Self::Tabular(k) => {
                if !k.finite_difference {
                    return Err(Error::Derivative(
                        "tabular kernel without finite-difference fallback has no state derivative".into(),
                    ));
                }
                let eps = 1e-6 * (1.0 + theta.abs());
                let slope = |j: usize| {
                    let x = next.point(j);
                    -(k.cdf(x, theta + eps, a) - k.cdf(x, theta - eps, a)) / (2.0 * eps)
                };
                let base = match cut {
                    None => next.segment_weights(next.lo(), next.hi()),
                    Some(c) => next.segment_weights(c.max(next.lo()), next.hi()),
                };
                Ok(base.weighted_by(slope))
            }
        }
    }

    /// Inverse-CDF draw from a uniform variate `u` in `[0, 1)`.
    pub fn sample(&self, theta: f64, a: f64, u: f64) -> f64 {
        match self {
            Self::AffineUniform(k) => k.shift(theta, a) + k.width * u,
            Self::Tabular(k) => {
                let (mut lo, mut hi) = (k.support.lo(), k.support.hi());
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if k.cdf(mid, theta, a) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// State feedback coefficient when the kernel is affine.
    pub fn as_affine(&self) -> Option<&AffineUniform> {
        match self {
            Self::AffineUniform(k) => Some(k),
            Self::Tabular(_) => None,
        }
    }
}

/// Linear interpolation helper re-exported for tabular rules.
pub(crate) fn interp(points: &[f64], values: &[f64], x: f64) -> f64 {
    interpolate(points, values, x)
}
