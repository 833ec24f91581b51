//! Incentive-compatibility audit: grid-exhaustive one-shot misreports and an
//! exhaustive deviation oracle for small instances.

mod oracle;

pub use oracle::{brute_force_deviation_oracle, OracleReport, DEFAULT_BUDGET};

use serde::Serialize;

use crate::envlab::horner;
use crate::lattice::Lattice;
use crate::par::map_range;
use crate::valsolve::ValueSolution;

pub const DEFAULT_IC_TOLERANCE: f64 = 1e-3;
const MAX_LISTED: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Misreport, then exit now.
    Stop,
    /// Misreport, then continue optimally under truthful reports.
    Continue,
    /// Misreport, then take the better of the two.
    Bellman,
}

/// Largest gain of one misreport over truth-telling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEntry {
    pub period: usize,
    pub branch: Branch,
    pub context: usize,
    pub gap: f64,
    pub theta: f64,
    pub theta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodGaps {
    pub period: usize,
    pub stop: GapEntry,
    /// Absent in the last period.
    pub continuation: Option<GapEntry>,
    pub bellman: GapEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ICReport {
    pub tolerance: f64,
    pub periods: Vec<PeriodGaps>,
    /// Worst branch-wise gap.
    pub worst_gap: f64,
    pub worst_bellman_gap: f64,
    /// Branch-wise verdict.
    pub verdict: bool,
    pub bellman_verdict: bool,
    pub forms_disagree: bool,
    /// Branch-wise gaps above the tolerance, worst first, at most 64.
    pub violations: Vec<GapEntry>,
}

impl ICReport {
    pub fn entries(&self) -> Vec<GapEntry> {
        self.periods
            .iter()
            .flat_map(|p| std::iter::once(p.stop).chain(p.continuation).chain(std::iter::once(p.bellman)))
            .collect()
    }
}

/// Payoffs of reporting node `j` at true node `i`, one row per true node.
struct Deviations {
    stop: Vec<f64>,
    continuation: Option<Vec<f64>>,
}

fn deviation_row(lattice: &Lattice, solution: &ValueSolution, t: usize, c: usize, i: usize, slices: &[Vec<f64>]) -> Deviations {
    let env = lattice.env();
    let layer = lattice.layer(t);
    let grid = lattice.grid(t);
    let weight = env.discount_pow(t);
    let rho = lattice.posted(t);
    let theta = grid.point(i);
    let n = grid.len();
    let exit_flow: Vec<f64> =
        (0..n).map(|j| weight * (horner(&slices[j], theta) + layer.terminal[(c, j)])).collect();
    let stop = exit_flow.iter().map(|f| f + rho).collect();
    let continuation = (t < lattice.horizon()).then(|| {
        let next = solution.period(t + 1);
        (0..n)
            .map(|j| {
                let a = layer.allocation[(c, j)];
                let w = lattice.weights_at(t, theta, a, None);
                let nc = lattice.next_context(t, j);
                let marginal = w.dot(next.stop_payoff.row(nc)) + weight * (layer.continuing[(c, j)] - layer.terminal[(c, j)]);
                let gain = w.dot(&next.continuing.row(nc).iter().map(|m| m.max(0.0)).collect::<Vec<_>>());
                exit_flow[j] + marginal + gain
            })
            .collect()
    });
    Deviations { stop, continuation }
}

fn row_gap(values: &[f64], i: usize) -> (f64, usize) {
    let (j, best) = values
        .iter()
        .enumerate()
        .fold((i, values[i]), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    (best - values[i], j)
}

fn agent_slices(lattice: &Lattice, t: usize, c: usize) -> Vec<Vec<f64>> {
    let poly = lattice.env().agent().poly(t);
    lattice.layer(t).allocation.row(c).iter().map(|&a| poly.slice_at_y(a)).collect()
}

/// Gain of reporting each node, per true node, for one period and context.
pub fn gap_matrix(lattice: &Lattice, solution: &ValueSolution, t: usize, c: usize, branch: Branch) -> Vec<Vec<f64>> {
    let slices = agent_slices(lattice, t, c);
    let n = lattice.grid(t).len();
    map_range(n, |i| {
        let d = deviation_row(lattice, solution, t, c, i, &slices);
        let row = match (branch, &d.continuation) {
            (Branch::Stop, _) | (_, None) => d.stop,
            (Branch::Continue, Some(cont)) => cont.clone(),
            (Branch::Bellman, Some(cont)) => d.stop.iter().zip(cont).map(|(s, k)| s.max(*k)).collect(),
        };
        let truth = row[i];
        row.iter().map(|v| v - truth).collect()
    })
}

/// Context, node, stop gap, continuation gap and Bellman gap, each gap with its worst report.
type GapRow = (usize, usize, (f64, usize), Option<(f64, usize)>, (f64, usize));

/// Grid-exhaustive one-shot misreport search.
pub fn one_shot_check(lattice: &Lattice, solution: &ValueSolution, tolerance: f64) -> ICReport {
    let horizon = lattice.horizon();
    let mut periods = Vec::with_capacity(horizon);
    let mut violations = Vec::new();
    for t in 1..=horizon {
        let grid = lattice.grid(t);
        let n = grid.len();
        let contexts = lattice.contexts(t);
        let slices: Vec<Vec<Vec<f64>>> = (0..contexts).map(|c| agent_slices(lattice, t, c)).collect();
        let rows = map_range(contexts * n, |k| {
            let (c, i) = (k / n, k % n);
            let d = deviation_row(lattice, solution, t, c, i, &slices[c]);
            let stop = row_gap(&d.stop, i);
            let (cont, bellman) = match &d.continuation {
                Some(cont) => {
                    let best: Vec<f64> = d.stop.iter().zip(cont).map(|(s, k)| s.max(*k)).collect();
                    (Some(row_gap(cont, i)), row_gap(&best, i))
                }
                None => (None, stop),
            };
            (c, i, stop, cont, bellman)
        });
        let entry = |branch, c: usize, i: usize, (gap, j): (f64, usize)| GapEntry {
            period: t,
            branch,
            context: c,
            gap,
            theta: grid.point(i),
            theta_hat: grid.point(j),
        };
        let worst = |pick: &dyn Fn(&GapRow) -> Option<(f64, usize)>,
                     branch: Branch| {
            rows.iter()
                .filter_map(|r| pick(r).map(|g| entry(branch, r.0, r.1, g)))
                .fold(None::<GapEntry>, |acc, e| match acc {
                    Some(a) if a.gap >= e.gap => Some(a),
                    _ => Some(e),
                })
        };
        let stop = worst(&|r| Some(r.2), Branch::Stop).expect("non-empty grid");
        let continuation = worst(&|r| r.3, Branch::Continue);
        let bellman = worst(&|r| Some(r.4), Branch::Bellman).expect("non-empty grid");
        for r in &rows {
            if r.2 .0 > tolerance {
                violations.push(entry(Branch::Stop, r.0, r.1, r.2));
            }
            if let Some(g) = r.3 {
                if g.0 > tolerance {
                    violations.push(entry(Branch::Continue, r.0, r.1, g));
                }
            }
        }
        periods.push(PeriodGaps { period: t, stop, continuation, bellman });
    }
    violations.sort_by(|a, b| b.gap.total_cmp(&a.gap));
    violations.truncate(MAX_LISTED);
    let worst_gap = periods
        .iter()
        .flat_map(|p| std::iter::once(p.stop.gap).chain(p.continuation.map(|e| e.gap)))
        .fold(0.0, f64::max);
    let worst_bellman_gap = periods.iter().map(|p| p.bellman.gap).fold(0.0, f64::max);
    let verdict = worst_gap <= tolerance;
    let bellman_verdict = worst_bellman_gap <= tolerance;
    ICReport {
        tolerance,
        periods,
        worst_gap,
        worst_bellman_gap,
        verdict,
        bellman_verdict,
        forms_disagree: verdict != bellman_verdict,
        violations,
    }
}
