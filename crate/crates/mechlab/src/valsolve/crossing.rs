use serde::Serialize;

use super::ValueSolution;
use crate::envlab::{ValidationReport, Violation};
use crate::lattice::{Field, Lattice};

pub const MONOTONE_SLACK: f64 = 1e-9;

/// Single crossing of the one-period postponement gain, plus the monotonicity
/// of the marginal value and of the price-free continuing value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleCrossingReport {
    pub crossing: ValidationReport,
    pub marginal_monotone: ValidationReport,
    pub continuing_free_monotone: ValidationReport,
}

impl SingleCrossingReport {
    pub fn passed(&self) -> bool {
        self.crossing.passed
    }

    pub fn first_failing_period(&self) -> Option<usize> {
        self.crossing.violations.iter().map(|v| v.period).min()
    }
}

/// Adjacent-pair decreases larger than the slack, per period.
pub(crate) fn monotone_scan(check: &str, fields: &[(usize, &Field)]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for &(period, field) in fields {
        for (c, row) in field.rows().iter().enumerate() {
            for (i, w) in row.windows(2).enumerate() {
                let drop = w[0] - w[1];
                worst = worst.max(drop);
                if drop > MONOTONE_SLACK || drop.is_nan() {
                    violations.push(Violation {
                        period,
                        node: i,
                        magnitude: drop,
                        detail: format!("decreases between nodes {i} and {} in context {c}", i + 1),
                    });
                }
            }
        }
    }
    ValidationReport::from_violations(check, violations, worst)
}

/// `χ_t = Z_t(t+1) - Z_t(t)` must be non-decreasing for every `t < T`.
pub fn check_single_crossing(lattice: &Lattice, solution: &ValueSolution) -> SingleCrossingReport {
    let horizon = lattice.horizon();
    let env = lattice.env();
    let crossing: Vec<(usize, Field)> = (1..horizon)
        .map(|t| {
            let layer = lattice.layer(t);
            let next = lattice.layer(t + 1);
            let weight = env.discount_pow(t);
            let next_weight = env.discount_pow(t + 1);
            let exit_next = next.agent_flow.zip_map(&next.terminal, |u, xi| next_weight * (u + xi));
            let ahead = lattice.expect_all(t, &exit_next);
            let gap = layer.continuing.zip_map(&layer.terminal, |phi, xi| weight * (phi - xi));
            (t, gap.zip_map(&ahead, |g, e| g + e))
        })
        .collect();
    let refs: Vec<(usize, &Field)> = crossing.iter().map(|(t, f)| (*t, f)).collect();
    let marginal: Vec<(usize, &Field)> = (1..horizon).map(|t| (t, &solution.period(t).marginal)).collect();
    let free: Vec<(usize, &Field)> = (1..horizon).map(|t| (t, &solution.period(t).continuing_free)).collect();
    SingleCrossingReport {
        crossing: monotone_scan("single_crossing", &refs),
        marginal_monotone: monotone_scan("marginal_monotone", &marginal),
        continuing_free_monotone: monotone_scan("continuing_free_monotone", &free),
    }
}
