//! The agent's optimal stopping problem: backward induction, the payoff
//! objects derived from it, threshold extraction and passage times.

mod crossing;
mod passage;
mod payoff;
mod threshold;

pub use crossing::{check_single_crossing, SingleCrossingReport};
pub use passage::mean_first_passage;
pub use payoff::{forward_horizon_payoffs, horizon_payoffs, payoff_representation_check, TelescopingReport};
pub use threshold::{extract_threshold, Cut};

use serde::Serialize;

use crate::envlab::grid::interpolate;
use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};

/// Stop and continue are tied when they differ by at most this; ties stop.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Continuation omits the current period's flow.
    pub strict_literal: bool,
    /// Fail when the single-crossing check does not pass.
    pub require_single_crossing: bool,
}

/// Tables of one period, one row per context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodValues {
    pub period: usize,
    pub points: Vec<f64>,
    pub value: Field,
    pub stop_payoff: Field,
    pub continuation: Field,
    /// Gain in expected payoff from postponing the exit by one period; zero at `T`.
    pub marginal: Field,
    /// Continuation minus stop payoff.
    pub continuing: Field,
    /// [`Self::continuing`] without the current posted price.
    pub continuing_free: Field,
    pub stop: Vec<Vec<bool>>,
}

/// Result of backward induction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSolution {
    pub periods: Vec<PeriodValues>,
    /// `max |μ - (μ̄ - ρ)|` over every node.
    pub identity_gap: f64,
    /// `E^{F_1}[V_1]`.
    pub ex_ante_value: f64,
}

impl ValueSolution {
    pub fn period(&self, t: usize) -> &PeriodValues {
        &self.periods[t - 1]
    }

    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    /// Per-context cut of the stopping region.
    pub fn thresholds(&self) -> Result<Vec<Vec<Cut>>> {
        extract_threshold(self)
    }

    /// One cutoff per period for `t < T` (`-inf` for never stopping); contexts
    /// of a period must agree.
    pub fn cutoffs(&self) -> Result<Vec<f64>> {
        let cuts = self.thresholds()?;
        let mut out = Vec::with_capacity(self.horizon().saturating_sub(1));
        for t in 1..self.horizon() {
            let values: Vec<f64> = cuts[t - 1].iter().map(Cut::value).collect();
            if values.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::Memory(format!(
                    "period {t} cutoff depends on the previous report; a single cutoff is undefined"
                )));
            }
            out.push(values[0]);
        }
        Ok(out)
    }
}

/// `J_t(t, θ_i) = δ^t [u_1 + ξ_t] + ρ(t)` at node `i` of context `c`.
pub fn stop_payoff(lattice: &Lattice, t: usize, c: usize, i: usize) -> f64 {
    let layer = lattice.layer(t);
    lattice.env().discount_pow(t) * (layer.agent_flow[(c, i)] + layer.terminal[(c, i)]) + lattice.posted(t)
}

fn stop_field(lattice: &Lattice, t: usize) -> Field {
    let n = lattice.grid(t).len();
    Field::from_fn(lattice.contexts(t), n, |c, i| stop_payoff(lattice, t, c, i))
}

/// Backward induction from `T` to 1.
pub fn solve_value(lattice: &Lattice, opts: SolverOptions) -> Result<ValueSolution> {
    let env = lattice.env();
    let horizon = lattice.horizon();
    let mut periods: Vec<PeriodValues> = Vec::with_capacity(horizon);
    let last = stop_field(lattice, horizon);
    let zeros = last.map(|_| 0.0);
    periods.push(PeriodValues {
        period: horizon,
        points: lattice.grid(horizon).points().to_vec(),
        value: last.clone(),
        continuation: last.clone(),
        stop_payoff: last,
        marginal: zeros.clone(),
        continuing: zeros.clone(),
        continuing_free: zeros.map(|_| lattice.posted(horizon)),
        stop: vec![vec![true; lattice.grid(horizon).len()]; lattice.contexts(horizon)],
    });
    for t in (1..horizon).rev() {
        let next = periods.last().expect("later period solved");
        let weight = env.discount_pow(t);
        let layer = lattice.layer(t);
        let stop_payoff = stop_field(lattice, t);
        let expected_value = lattice.expect_all(t, &next.value);
        let expected_stop = lattice.expect_all(t, &next.stop_payoff);
        let expected_gain = lattice.expect_all(t, &next.continuing.map(|m| m.max(0.0)));
        let flow = if opts.strict_literal {
            layer.agent_flow.map(|_| 0.0)
        } else {
            layer.agent_flow.zip_map(&layer.continuing, |u, phi| weight * (u + phi))
        };
        let continuation = flow.zip_map(&expected_value, |f, ev| f + ev);
        let value = stop_payoff.zip_map(&continuation, f64::max);
        let continuing = continuation.zip_map(&stop_payoff, |c, j| c - j);
        let payment_gap = layer.continuing.zip_map(&layer.terminal, |phi, xi| weight * (phi - xi));
        let marginal = expected_stop.zip_map(&payment_gap, |e, d| e + d);
        let continuing_free = marginal.zip_map(&expected_gain, |l, g| l + g);
        let stop = continuing.rows().iter().map(|r| r.iter().map(|&m| m <= TIE_TOLERANCE).collect()).collect();
        periods.push(PeriodValues {
            period: t,
            points: lattice.grid(t).points().to_vec(),
            value,
            stop_payoff,
            continuation,
            marginal,
            continuing,
            continuing_free,
            stop,
        });
    }
    periods.reverse();
    let identity_gap = periods
        .iter()
        .map(|p| {
            let rho = lattice.posted(p.period);
            p.continuing.max_abs_diff(&p.continuing_free.map(|m| m - rho))
        })
        .fold(0.0, f64::max);
    let ex_ante_value = env.initial_weights(None).dot(periods[0].value.row(0));
    let solution = ValueSolution { periods, identity_gap, ex_ante_value };
    if opts.require_single_crossing {
        let report = check_single_crossing(lattice, &solution);
        if !report.passed() {
            return Err(Error::Assumption(format!(
                "single crossing fails at period {}",
                report.first_failing_period().unwrap_or(0)
            )));
        }
    }
    Ok(solution)
}

/// `L_t(θ, θ̂)`: expected next stop payoff with the kernel conditioned on the
/// true state and the reported allocation, plus the current payment gap.
pub fn marginal_value(
    lattice: &Lattice,
    solution: &ValueSolution,
    t: usize,
    context: usize,
    theta: f64,
    report: f64,
) -> Result<f64> {
    if t == 0 || t >= lattice.horizon() {
        return Err(Error::Index(format!(
            "marginal value needs a period before {}, got {t}",
            lattice.horizon()
        )));
    }
    let grid = lattice.grid(t);
    let layer = lattice.layer(t);
    let points = grid.points();
    let a = interpolate(points, layer.allocation.row(context), report);
    let phi = interpolate(points, layer.continuing.row(context), report);
    let xi = interpolate(points, layer.terminal.row(context), report);
    let weights = lattice.weights_at(t, theta, a, None);
    let next_stop = &solution.period(t + 1).stop_payoff;
    let expected = if lattice.has_memory(t + 1) {
        let (k, f) = grid.locate(report);
        let lower = weights.dot(next_stop.row(k));
        if f == 0.0 {
            lower
        } else {
            lower + f * (weights.dot(next_stop.row(k + 1)) - lower)
        }
    } else {
        weights.dot(next_stop.row(0))
    };
    Ok(expected + lattice.env().discount_pow(t) * (phi - xi))
}
