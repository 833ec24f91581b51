use serde::Serialize;

use super::ValueSolution;
use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};
use crate::par::map_range;

pub const TELESCOPING_TOLERANCE: f64 = 1e-6;

/// Flow accrued at period `s` when the exit happens at `horizon`.
fn flow(lattice: &Lattice, s: usize, horizon: usize) -> Field {
    let layer = lattice.layer(s);
    let weight = lattice.env().discount_pow(s);
    if s == horizon {
        let rho = lattice.posted(s);
        layer.agent_flow.zip_map(&layer.terminal, |u, xi| weight * (u + xi) + rho)
    } else {
        layer.agent_flow.zip_map(&layer.continuing, |u, phi| weight * (u + phi))
    }
}

fn check_horizon(lattice: &Lattice, horizon: usize) -> Result<()> {
    if horizon == 0 || horizon > lattice.horizon() {
        return Err(Error::Index(format!("exit period {horizon} outside 1..={}", lattice.horizon())));
    }
    Ok(())
}

/// `J_t(τ, ·)` for `t = 1..=τ` under truthful reports and the forced exit `τ`,
/// by backward expectation.
pub fn horizon_payoffs(lattice: &Lattice, horizon: usize) -> Result<Vec<Field>> {
    check_horizon(lattice, horizon)?;
    let mut out = vec![flow(lattice, horizon, horizon)];
    for s in (1..horizon).rev() {
        let ahead = lattice.expect_all(s, out.last().expect("later period"));
        out.push(flow(lattice, s, horizon).zip_map(&ahead, |f, e| f + e));
    }
    out.reverse();
    Ok(out)
}

/// Same quantity as [`horizon_payoffs`], computed by pushing the state law
/// forward from every start node.
pub fn forward_horizon_payoffs(lattice: &Lattice, horizon: usize) -> Result<Vec<Field>> {
    check_horizon(lattice, horizon)?;
    let flows: Vec<Field> = (1..=horizon).map(|s| flow(lattice, s, horizon)).collect();
    let out = (1..=horizon)
        .map(|t| {
            let n = lattice.grid(t).len();
            let contexts = lattice.contexts(t);
            let rows = map_range(contexts, |c| {
                (0..n).map(|i| forward_from(lattice, &flows, t, c, i, horizon)).collect()
            });
            Field::new(rows)
        })
        .collect();
    Ok(out)
}

fn forward_from(lattice: &Lattice, flows: &[Field], t: usize, c: usize, i: usize, horizon: usize) -> f64 {
    // rows left empty carry no mass
    let mut mass: Vec<Vec<f64>> = vec![Vec::new(); lattice.contexts(t)];
    mass[c] = vec![0.0; lattice.grid(t).len()];
    mass[c][i] = 1.0;
    let mut total = 0.0;
    for s in t..=horizon {
        let f = &flows[s - 1];
        total += mass
            .iter()
            .enumerate()
            .flat_map(|(cc, m)| m.iter().zip(f.row(cc)).map(|(a, b)| a * b))
            .sum::<f64>();
        if s == horizon {
            break;
        }
        let n_next = lattice.grid(s + 1).len();
        let mut next: Vec<Vec<f64>> = vec![Vec::new(); lattice.contexts(s + 1)];
        let layer = lattice.layer(s);
        for (cc, row) in mass.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let target = &mut next[lattice.next_context(s, j)];
                if target.is_empty() {
                    target.resize(n_next, 0.0);
                }
                for (k, w) in layer.next[cc][j].iter() {
                    target[k] += m * w;
                }
            }
        }
        mass = next;
    }
    total
}

/// Gap between the forced-exit payoff and its telescoped form
/// `J_t(t) + E[Σ_{s=t}^{τ-1} (L_s - ρ(s))]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelescopingReport {
    pub horizon: usize,
    /// Worst gap over every period `t ≤ τ` and node.
    pub interim_gap: f64,
    pub worst_period: usize,
    pub worst_node: usize,
    /// Gap of the ex-ante form, where stopping before period 1 is worth 0.
    pub ex_ante_gap: f64,
    pub passed: bool,
}

pub fn payoff_representation_check(
    lattice: &Lattice,
    solution: &ValueSolution,
    horizon: usize,
) -> Result<TelescopingReport> {
    let direct = forward_horizon_payoffs(lattice, horizon)?;
    // remainder[t-1] = E[Σ_{s=t}^{τ-1} (L_s - ρ(s))]
    let mut remainder = vec![Field::filled(lattice.contexts(horizon), lattice.grid(horizon).len(), 0.0)];
    for s in (1..horizon).rev() {
        let ahead = lattice.expect_all(s, remainder.last().expect("later period"));
        let rho = lattice.posted(s);
        remainder.push(solution.period(s).marginal.zip_map(&ahead, |l, e| l - rho + e));
    }
    remainder.reverse();
    let mut report = TelescopingReport {
        horizon,
        interim_gap: 0.0,
        worst_period: 1,
        worst_node: 0,
        ex_ante_gap: 0.0,
        passed: true,
    };
    for t in 1..=horizon {
        let telescoped = solution.period(t).stop_payoff.zip_map(&remainder[t - 1], |j, r| j + r);
        for (c, row) in direct[t - 1].rows().iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                let gap = (v - telescoped[(c, i)]).abs();
                if gap > report.interim_gap || gap.is_nan() {
                    report.interim_gap = gap;
                    report.worst_period = t;
                    report.worst_node = i;
                }
            }
        }
    }
    let initial = lattice.env().initial_weights(None);
    let before_start = 0.0;
    let first_marginal = initial.dot(solution.period(1).stop_payoff.row(0));
    let ex_ante_direct = initial.dot(direct[0].row(0));
    let ex_ante_telescoped = before_start + first_marginal + initial.dot(remainder[0].row(0));
    report.ex_ante_gap = (ex_ante_direct - ex_ante_telescoped).abs();
    report.passed = report.interim_gap <= TELESCOPING_TOLERANCE && report.ex_ante_gap <= TELESCOPING_TOLERANCE;
    Ok(report)
}
