use serde::Serialize;

use super::environment::Environment;
use super::kernel::TransitionKernel;
use crate::mechcore::AllocationRule;
use crate::par::map_range;

pub const FOSD_TOLERANCE: f64 = 1e-10;
const MAX_LISTED: usize = 64;

/// One failing location of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub period: usize,
    pub node: usize,
    pub magnitude: f64,
    pub detail: String,
}

/// Outcome of an assumption check. Only the first violations are listed;
/// `violation_count` has the total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub check: String,
    pub passed: bool,
    pub worst: f64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(check: &str, mut violations: Vec<Violation>, worst: f64) -> Self {
        let violation_count = violations.len();
        violations.truncate(MAX_LISTED);
        Self { check: check.to_string(), passed: violation_count == 0, worst, violation_count, violations }
    }

    pub fn pass(check: &str) -> Self {
        Self::from_violations(check, Vec::new(), 0.0)
    }
}

/// Positive initial density at interior grid-1 nodes, and positive transition
/// density at every next-grid node strictly inside the reachable support.
pub fn check_full_support(env: &Environment) -> ValidationReport {
    let mut violations = Vec::new();
    let g1 = env.grid(1);
    for (i, d) in env.initial_density().iter().enumerate().take(g1.len() - 1).skip(1) {
        if *d <= 0.0 {
            violations.push(Violation {
                period: 1,
                node: i,
                magnitude: *d,
                detail: "initial density vanishes".into(),
            });
        }
    }
    for t in 1..env.horizon() {
        match env.kernel(t) {
            TransitionKernel::Tabular(k) => {
                let support = k.support_grid();
                for s in 0..k.state_nodes().len() {
                    for a in 0..k.alloc_nodes().len() {
                        let row = k.stored_row(s, a);
                        for (j, d) in row.iter().enumerate().take(row.len() - 1).skip(1) {
                            if *d <= 0.0 {
                                violations.push(Violation {
                                    period: t + 1,
                                    node: env.grid(t + 1).nearest(support.point(j)),
                                    magnitude: *d,
                                    detail: format!("kernel row ({s}, {a}) vanishes at support node {j}"),
                                });
                            }
                        }
                    }
                }
            }
            kernel @ TransitionKernel::AffineUniform(_) => {
                let (a_lo, a_hi) = env.allocation_range(t);
                let next = env.grid(t + 1);
                for &theta in env.grid(t).points() {
                    for a in [a_lo, 0.5 * (a_lo + a_hi), a_hi] {
                        let (lo, hi) = kernel.support(theta, a);
                        for (j, &x) in next.points().iter().enumerate() {
                            if x > lo && x < hi && kernel.density(x, theta, a) <= 0.0 {
                                violations.push(Violation {
                                    period: t + 1,
                                    node: j,
                                    magnitude: 0.0,
                                    detail: format!("density vanishes given ({theta}, {a})"),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    ValidationReport::from_violations("full_support", violations, 0.0)
}

/// `F(x | θ', α(θ')) ≤ F(x | θ, α(θ))` for adjacent nodes `θ < θ'` and every
/// `x` on the next grid. Memory periods are checked under every previous node.
pub fn check_fosd(env: &Environment, alloc: &AllocationRule) -> ValidationReport {
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for t in 1..env.horizon() {
        let grid = env.grid(t);
        let next = env.grid(t + 1).points();
        let kernel = env.kernel(t);
        let contexts: Vec<Option<f64>> = if alloc.has_memory(t) {
            env.grid(t - 1).points().iter().map(|&p| Some(p)).collect()
        } else {
            vec![None]
        };
        let per_context = map_range(contexts.len(), |c| {
            let prev = contexts[c];
            let cdfs: Vec<Vec<f64>> = grid
                .points()
                .iter()
                .map(|&theta| {
                    let a = alloc.eval(t, theta, prev).unwrap_or(f64::NAN);
                    kernel.cdf_on(next, theta, a)
                })
                .collect();
            let mut found = Vec::new();
            let mut local_worst = 0.0f64;
            for i in 0..grid.len() - 1 {
                let (gap, j) = cdfs[i + 1]
                    .iter()
                    .zip(&cdfs[i])
                    .map(|(hi, lo)| hi - lo)
                    .enumerate()
                    .fold((f64::NEG_INFINITY, 0), |acc, (j, d)| if d > acc.0 { (d, j) } else { acc });
                local_worst = local_worst.max(gap);
                if gap > FOSD_TOLERANCE || gap.is_nan() {
                    found.push(Violation {
                        period: t,
                        node: i,
                        magnitude: gap,
                        detail: format!(
                            "next-state law at node {} is not above node {i} at x = {}{}",
                            i + 1,
                            next[j],
                            prev.map_or(String::new(), |p| format!(" (previous report {p})"))
                        ),
                    });
                }
            }
            (found, local_worst)
        });
        for (found, w) in per_context {
            worst = worst.max(w);
            violations.extend(found);
        }
    }
    ValidationReport::from_violations("fosd", violations, worst)
}

/// Difference quotients of the agent utility in the state, at a spread of
/// allocations, stay below the configured bound.
pub fn check_lipschitz(env: &Environment) -> ValidationReport {
    let bound = env.lipschitz_bound();
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for t in 1..=env.horizon() {
        let grid = env.grid(t);
        let (a_lo, a_hi) = env.allocation_range(t);
        for k in 0..=4 {
            let a = a_lo + (a_hi - a_lo) * k as f64 / 4.0;
            for i in 0..grid.len() - 1 {
                let (x0, x1) = (grid.point(i), grid.point(i + 1));
                let q = ((env.agent().value(t, x1, a) - env.agent().value(t, x0, a)) / (x1 - x0)).abs();
                worst = worst.max(q);
                if q > bound || !q.is_finite() {
                    violations.push(Violation {
                        period: t,
                        node: i,
                        magnitude: q,
                        detail: format!("difference quotient at allocation {a} exceeds {bound}"),
                    });
                }
            }
        }
    }
    ValidationReport::from_violations("lipschitz", violations, worst)
}
