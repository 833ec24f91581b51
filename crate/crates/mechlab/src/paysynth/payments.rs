use serde::Serialize;

use super::potentials::PotentialTable;
use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};

/// Tolerance for posted-price rows that must agree across memory contexts.
const CONTEXT_AGREEMENT: f64 = 1e-9;
const ROOT_TOLERANCE: f64 = 1e-9;

/// State-dependent payments on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentTables {
    pub continuing: Vec<Field>,
    pub terminal: Vec<Field>,
}

/// Continuing payment: discounted drop of the continuing potential net of the
/// flow; terminal payment: discounted exit potential net of the flow. The
/// literal variant discounts the terminal potential by one period only.
pub fn construct_phi_xi(lattice: &Lattice, pot: &PotentialTable, strict_literal: bool) -> PaymentTables {
    let env = lattice.env();
    let horizon = lattice.horizon();
    let mut continuing = Vec::with_capacity(horizon);
    let mut terminal = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let flow = &lattice.layer(t).agent_flow;
        let undiscount = 1.0 / env.discount_pow(t);
        let exit_scale = if strict_literal { 1.0 / env.discount() } else { undiscount };
        terminal.push(pot.stop[t - 1].zip_map(flow, |b, u| exit_scale * b - u));
        if t < horizon {
            let ahead = lattice.expect_all(t, &pot.cont[t]);
            let drop = pot.cont[t - 1].zip_map(&ahead, |b, e| b - e);
            continuing.push(drop.zip_map(flow, |d, u| undiscount * d - u));
        } else {
            continuing.push(flow.map(|_| 0.0));
        }
    }
    PaymentTables { continuing, terminal }
}

/// Value of the best remaining exit plan net of the continuing potential, for
/// posted prices `posted` (zero in the last period).
fn exit_surplus(lattice: &Lattice, pot: &PotentialTable, posted: &[f64], from: usize) -> Vec<Option<Field>> {
    let horizon = lattice.horizon();
    let mut out: Vec<Option<Field>> = vec![None; horizon + 1];
    out[horizon] = Some(pot.spread(horizon).map(|_| 0.0));
    for s in (from..horizon).rev() {
        let ahead = lattice.expect_all(s, out[s + 1].as_ref().expect("later period"));
        let now = pot.spread(s).map(|d| posted[s - 1] - d);
        out[s] = Some(now.zip_map(&ahead, f64::max));
    }
    out
}

/// Posted price at which period-`t` states are indifferent, per node: the
/// potential spread plus the expected exit surplus one period ahead.
fn indifference_level(lattice: &Lattice, pot: &PotentialTable, surplus: &[Option<Field>], t: usize) -> Field {
    let spread = pot.spread(t);
    if t == lattice.horizon() {
        return spread;
    }
    let ahead = lattice.expect_all(t, surplus[t + 1].as_ref().expect("later period"));
    spread.zip_map(&ahead, |d, e| d + e)
}

fn context_free_value(level: &Field, t: usize, eval: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let values: Vec<f64> = level.rows().iter().map(|r| eval(r)).collect();
    let first = values[0];
    if values.iter().any(|v| (v - first).abs() > CONTEXT_AGREEMENT) {
        return Err(Error::Memory(format!("period {t} indifference level depends on the previous report")));
    }
    Ok(first)
}

/// Posted prices implementing the exit rule "stop iff θ_t ≤ η(t)", backward from
/// a zero final price. `eta` covers at least the first `T-1` periods.
pub fn construct_rho(lattice: &Lattice, pot: &PotentialTable, eta: &[f64]) -> Result<Vec<f64>> {
    let horizon = lattice.horizon();
    if eta.len() + 1 < horizon {
        return Err(Error::Schema(format!("{} thresholds for {horizon} periods", eta.len())));
    }
    let mut posted = vec![0.0; horizon];
    for t in (1..horizon).rev() {
        let grid = lattice.grid(t);
        let cut = eta[t - 1];
        if !(grid.lo()..=grid.hi()).contains(&cut) {
            return Err(Error::Index(format!("threshold {cut} outside grid {t} [{}, {}]", grid.lo(), grid.hi())));
        }
        let surplus = exit_surplus(lattice, pot, &posted, t + 1);
        let level = indifference_level(lattice, pot, &surplus, t);
        posted[t - 1] = context_free_value(&level, t, |row| grid.interpolate(row, cut))?;
    }
    Ok(posted)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularSetReport {
    pub member: bool,
    /// Implied threshold per period, when one exists.
    pub eta: Vec<Option<f64>>,
    pub first_infeasible: Option<usize>,
    /// Range of the indifference level per period.
    pub level_min: Vec<f64>,
    pub level_max: Vec<f64>,
}

/// Largest root of `row(θ) = target` on the interpolated row.
fn largest_root(points: &[f64], row: &[f64], target: f64) -> Option<f64> {
    let f: Vec<f64> = row.iter().map(|v| v - target).collect();
    let n = f.len();
    if f[n - 1] == 0.0 {
        return Some(points[n - 1]);
    }
    let k = (0..n - 1).rev().find(|&k| f[k] == 0.0 || (f[k] < 0.0) != (f[k + 1] < 0.0))?;
    if f[k] == 0.0 {
        return Some(points[k]);
    }
    let (mut lo, mut hi) = (points[k], points[k + 1]);
    let (f_lo, f_hi) = (f[k], f[k + 1]);
    let at = |x: f64| f_lo + (f_hi - f_lo) * (x - points[k]) / (points[k + 1] - points[k]);
    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if (at(mid) < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Whether the posted prices `r` implement some threshold rule, and which one.
pub fn regular_set_membership(lattice: &Lattice, pot: &PotentialTable, r: &[f64]) -> Result<RegularSetReport> {
    let horizon = lattice.horizon();
    if r.len() != horizon || r[horizon - 1] != 0.0 {
        return Err(Error::Schema("posted prices need one entry per period and a zero final entry".into()));
    }
    let surplus = exit_surplus(lattice, pot, r, 2.min(horizon));
    let mut report = RegularSetReport {
        member: true,
        eta: vec![None; horizon],
        first_infeasible: None,
        level_min: vec![0.0; horizon],
        level_max: vec![0.0; horizon],
    };
    for t in 1..=horizon {
        let grid = lattice.grid(t);
        let level = indifference_level(lattice, pot, &surplus, t);
        report.level_min[t - 1] = level.values().fold(f64::INFINITY, f64::min);
        report.level_max[t - 1] = level.values().fold(f64::NEG_INFINITY, f64::max);
        let roots: Vec<Option<f64>> = level.rows().iter().map(|row| largest_root(grid.points(), row, r[t - 1])).collect();
        let root = roots[0].filter(|x| roots.iter().all(|y| y.is_some_and(|y| (y - x).abs() <= ROOT_TOLERANCE)));
        report.eta[t - 1] = root;
        if root.is_none() && report.first_infeasible.is_none() {
            report.member = false;
            report.first_infeasible = Some(t);
        }
    }
    Ok(report)
}
