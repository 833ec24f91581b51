use serde::Serialize;

use crate::error::Result;
use crate::lattice::Lattice;
use crate::valsolve::{horizon_payoffs, ValueSolution};

pub const PARTICIPATION_SLACK: f64 = 1e-9;
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticipationReport {
    pub ex_ante_value: f64,
    /// Interim value of the lowest first-period state.
    pub bottom_value: f64,
    pub passed: bool,
}

/// The agent's ex-ante value is nonnegative.
pub fn rp_check(solution: &ValueSolution) -> ParticipationReport {
    let ex_ante_value = solution.ex_ante_value;
    ParticipationReport {
        ex_ante_value,
        bottom_value: solution.period(1).value[(0, 0)],
        passed: ex_ante_value >= -PARTICIPATION_SLACK,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    /// Whether the agent utility is declared non-decreasing in the state.
    pub hypothesis_flagged: bool,
    /// Largest decrease between adjacent nodes; zero when none.
    pub worst_drop: f64,
    pub period: usize,
    pub exit_period: usize,
    pub context: usize,
    pub theta: f64,
    pub passed: bool,
}

/// Forced-exit payoffs are non-decreasing in the current state, for every
/// exit period and every period up to it.
pub fn monotone_payoff_check(lattice: &Lattice) -> Result<MonotoneReport> {
    let mut report = MonotoneReport {
        hypothesis_flagged: lattice.env().agent().is_monotone(),
        worst_drop: 0.0,
        period: 1,
        exit_period: 1,
        context: 0,
        theta: lattice.grid(1).lo(),
        passed: true,
    };
    for tau in 1..=lattice.horizon() {
        for (k, field) in horizon_payoffs(lattice, tau)?.iter().enumerate() {
            let t = k + 1;
            let grid = lattice.grid(t);
            for (c, row) in field.rows().iter().enumerate() {
                for (i, pair) in row.windows(2).enumerate() {
                    let drop = pair[0] - pair[1];
                    if drop > report.worst_drop {
                        report = MonotoneReport {
                            worst_drop: drop,
                            period: t,
                            exit_period: tau,
                            context: c,
                            theta: grid.point(i + 1),
                            ..report
                        };
                    }
                }
            }
        }
    }
    report.passed = report.worst_drop <= MONOTONE_SLACK;
    Ok(report)
}
