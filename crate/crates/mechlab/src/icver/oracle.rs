use serde::Serialize;

use crate::envlab::Environment;
use crate::error::{Error, Result};
use crate::mechcore::Mechanism;
use crate::par::map_range;

/// Leaf evaluations allowed by default.
pub const DEFAULT_BUDGET: u128 = 100_000_000;
const MAX_HORIZON: usize = 3;
const MAX_NODES: usize = 9;

/// Largest interim gain of any deviation plan at one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePeriod {
    pub period: usize,
    pub gain: f64,
    pub context: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub tolerance: f64,
    pub periods: Vec<OraclePeriod>,
    pub worst_gain: f64,
    /// Truthful reports with the best stopping rule, before period 1.
    pub ex_ante_truthful: f64,
    pub ex_ante_best: f64,
    /// Some reachable state has a plan beating truth-telling by more than the tolerance.
    pub profitable: bool,
    pub evaluations: u128,
}

/// Leaves enumerated from one state of each period.
fn leaves(env: &Environment) -> Vec<u128> {
    let horizon = env.horizon();
    let mut out = vec![0u128; horizon + 1];
    out[horizon] = env.grid(horizon).len() as u128;
    for t in (1..horizon).rev() {
        let n = env.grid(t).len() as u128;
        let next = env.grid(t + 1).len() as u128;
        out[t] = n.saturating_mul(next.saturating_mul(out[t + 1]).saturating_add(1));
    }
    out
}

struct Search<'a> {
    env: &'a Environment,
    mech: &'a Mechanism,
}

impl Search<'_> {
    /// Best payoff from node `i` of period `t` over every later report and exit
    /// plan. `prev` is the previous report's node; `truthful` pins reports to the
    /// true node.
    fn best(&self, t: usize, prev: Option<usize>, i: usize, truthful: bool) -> Result<f64> {
        let env = self.env;
        let grid = env.grid(t);
        let theta = grid.point(i);
        let weight = env.discount_pow(t);
        let prev_report = match (prev, self.mech.allocation().has_memory(t)) {
            (Some(p), true) => Some(env.grid(t - 1).point(p)),
            _ => None,
        };
        let reports = if truthful { i..i + 1 } else { 0..grid.len() };
        let mut best = f64::NEG_INFINITY;
        for j in reports {
            let out = self.mech.eval(t, grid.point(j), prev_report)?;
            let u = env.agent().value(t, theta, out.allocation);
            let exit = weight * (u + out.terminal) + self.mech.payments().posted(t);
            best = best.max(exit);
            if t < env.horizon() {
                let w = env.kernel(t).weights(env.grid(t + 1), theta, out.allocation, None);
                let mut ahead = 0.0;
                for (k, p) in w.iter() {
                    ahead += p * self.best(t + 1, Some(j), k, truthful)?;
                }
                best = best.max(weight * (u + out.continuing) + ahead);
            }
        }
        Ok(best)
    }
}

/// Exhaustive search over pure reporting plans jointly with exit plans on
/// small grids; the optimum is compared with truth-telling at every state.
pub fn brute_force_deviation_oracle(
    env: &Environment,
    mech: &Mechanism,
    budget: u128,
    tolerance: f64,
) -> Result<OracleReport> {
    let horizon = env.horizon();
    let per_state = leaves(env);
    let contexts = |t: usize| if t > 1 && mech.allocation().has_memory(t) { env.grid(t - 1).len() } else { 1 };
    let required = (1..=horizon)
        .map(|t| (contexts(t) * env.grid(t).len()) as u128 * per_state[t])
        .fold(0u128, u128::saturating_add);
    let too_large = horizon > MAX_HORIZON || env.grids().iter().any(|g| g.len() > MAX_NODES);
    if too_large || required > budget {
        return Err(Error::Budget { required: if too_large { u128::MAX } else { required }, budget });
    }
    let search = Search { env, mech };
    let mut periods = Vec::with_capacity(horizon);
    let mut first = (Vec::new(), Vec::new());
    for t in 1..=horizon {
        let n = env.grid(t).len();
        let rows = map_range(contexts(t) * n, |k| -> Result<(f64, f64)> {
            let (c, i) = (k / n, k % n);
            let prev = (t > 1).then_some(c);
            Ok((search.best(t, prev, i, false)?, search.best(t, prev, i, true)?))
        });
        let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
        let (k, gain) = rows
            .iter()
            .map(|(b, tr)| b - tr)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, g)| if g > acc.1 { (k, g) } else { acc });
        periods.push(OraclePeriod { period: t, gain, context: k / n, theta: env.grid(t).point(k % n) });
        if t == 1 {
            first = rows.into_iter().unzip();
        }
    }
    let initial = env.initial_weights(None);
    let worst_gain = periods.iter().map(|p| p.gain).fold(0.0, f64::max);
    Ok(OracleReport {
        tolerance,
        worst_gain,
        ex_ante_truthful: initial.dot(&first.1),
        ex_ante_best: initial.dot(&first.0),
        profitable: worst_gain > tolerance,
        evaluations: required * 2,
        periods,
    })
}
