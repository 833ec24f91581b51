use serde::Serialize;

use crate::envlab::grid::interpolate;
use crate::envlab::utility::Poly2;
use crate::error::{Error, Result};

/// Values at increasing nodes, linearly interpolated and clamped outside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeTable {
    points: Vec<f64>,
    values: Vec<f64>,
}

impl NodeTable {
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::Schema(format!(
                "node table has {} points and {} values",
                points.len(),
                values.len()
            )));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema("node table points must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(values));
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.points, &self.values, x)
    }
}

/// One row of current-state values per previous-state node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextTable {
    prev_points: Vec<f64>,
    points: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl ContextTable {
    pub fn new(prev_points: Vec<f64>, points: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if prev_points.is_empty() || rows.len() != prev_points.len() {
            return Err(Error::Schema(format!(
                "context table has {} rows for {} previous-state nodes",
                rows.len(),
                prev_points.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&prev_points) || !increasing(&points) || points.is_empty() {
            return Err(Error::Schema("context table nodes must be strictly increasing".into()));
        }
        if rows.iter().any(|r| r.len() != points.len()) {
            return Err(Error::Schema("context table rows must match the current-state nodes".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(rows.concat()));
        }
        Ok(Self { prev_points, points, rows })
    }

    pub fn prev_points(&self) -> &[f64] {
        &self.prev_points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn eval(&self, x: f64, prev: f64) -> f64 {
        let column: Vec<f64> = self.rows.iter().map(|r| interpolate(&self.points, r, x)).collect();
        interpolate(&self.prev_points, &column, prev)
    }
}

/// Per-period decision rule of the current report, optionally also of the
/// previous report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFn {
    /// Polynomial in (current, previous).
    Poly(Poly2),
    Nodes(NodeTable),
    Contexts(ContextTable),
}

impl StateFn {
    pub fn zero() -> Self {
        Self::Poly(Poly2::zero())
    }

    pub fn constant(k: f64) -> Self {
        Self::Poly(Poly2::constant(k))
    }

    /// Zero polynomial; tables always count as nonzero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Poly(p) if p.terms().iter().all(|m| m.coef == 0.0))
    }

    pub fn uses_memory(&self) -> bool {
        match self {
            Self::Poly(p) => p.uses_y(),
            Self::Nodes(_) => false,
            Self::Contexts(_) => true,
        }
    }

    pub fn eval(&self, x: f64, prev: Option<f64>) -> Result<f64> {
        match (self, prev) {
            (Self::Poly(p), Some(y)) => Ok(p.eval(x, y)),
            (Self::Poly(p), None) if !p.uses_y() => Ok(p.eval(x, 0.0)),
            (Self::Nodes(t), _) => Ok(t.eval(x)),
            (Self::Contexts(t), Some(y)) => Ok(t.eval(x, y)),
            (_, None) => Err(Error::Memory(
                "rule depends on the previous report but none was supplied".into(),
            )),
        }
    }

    /// Adds a constant to every value.
    pub fn shifted(&self, k: f64) -> Self {
        match self {
            Self::Poly(p) => Self::Poly(p.plus_constant(k)),
            Self::Nodes(t) => Self::Nodes(NodeTable {
                points: t.points.clone(),
                values: t.values.iter().map(|v| v + k).collect(),
            }),
            Self::Contexts(t) => Self::Contexts(ContextTable {
                prev_points: t.prev_points.clone(),
                points: t.points.clone(),
                rows: t.rows.iter().map(|r| r.iter().map(|v| v + k).collect()).collect(),
            }),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        match self {
            Self::Poly(p) => Self::Poly(p.scaled(k)),
            Self::Nodes(t) => Self::Nodes(NodeTable {
                points: t.points.clone(),
                values: t.values.iter().map(|v| v * k).collect(),
            }),
            Self::Contexts(t) => Self::Contexts(ContextTable {
                prev_points: t.prev_points.clone(),
                points: t.points.clone(),
                rows: t.rows.iter().map(|r| r.iter().map(|v| v * k).collect()).collect(),
            }),
        }
    }
}
