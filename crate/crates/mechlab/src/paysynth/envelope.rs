use serde::Serialize;

use crate::envlab::{horner, Weights};
use crate::error::Result;
use crate::lattice::{Field, Lattice};
use crate::valsolve::horizon_payoffs;

/// State derivatives of forced-exit payoffs under truthful reports.
#[derive(Debug, Clone)]
pub struct EnvelopeTable {
    /// `gamma[t-1][τ-t]`: derivative at period `t` when the exit is forced at `τ ≥ t`.
    pub gamma: Vec<Vec<Field>>,
    /// `response[t-1][s-t]`: expected impulse response of the period-`s` state to the
    /// period-`t` state.
    pub response: Vec<Vec<Field>>,
}

impl EnvelopeTable {
    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    /// Derivative at period `t` for exit period `τ`.
    pub fn at(&self, t: usize, horizon: usize) -> &Field {
        &self.gamma[t - 1][horizon - t]
    }
}

/// Applies the period-`t` impulse weights to a field of period `t + 1`.
fn push_back(lattice: &Lattice, t: usize, weights: &[Vec<Weights>], g: &Field) -> Field {
    let n = lattice.grid(t).len();
    Field::from_fn(weights.len(), n, |c, i| weights[c][i].dot(g.row(lattice.next_context(t, i))))
}

fn slopes(lattice: &Lattice) -> Vec<Field> {
    (1..=lattice.horizon())
        .map(|t| {
            let weight = lattice.env().discount_pow(t);
            lattice.layer(t).agent_slope.map(|d| weight * d)
        })
        .collect()
}

fn all_impulse_weights(lattice: &Lattice) -> Result<Vec<Vec<Vec<Weights>>>> {
    (1..lattice.horizon()).map(|t| lattice.impulse_weights(t)).collect()
}

/// Backward recursion: the derivative at the exit period is the discounted
/// utility slope; earlier derivatives add the impulse-weighted derivative one
/// period ahead.
pub fn envelope_gamma(lattice: &Lattice) -> Result<EnvelopeTable> {
    let horizon = lattice.horizon();
    let slope = slopes(lattice);
    let impulse = all_impulse_weights(lattice)?;
    let mut gamma: Vec<Vec<Field>> = vec![Vec::new(); horizon];
    let mut response: Vec<Vec<Field>> = vec![Vec::new(); horizon];
    for t in (1..=horizon).rev() {
        let shape = (lattice.contexts(t), lattice.grid(t).len());
        gamma[t - 1].push(slope[t - 1].clone());
        response[t - 1].push(Field::filled(shape.0, shape.1, 1.0));
        if t < horizon {
            let w = &impulse[t - 1];
            for k in 0..horizon - t {
                let ahead = push_back(lattice, t, w, &gamma[t][k]);
                gamma[t - 1].push(slope[t - 1].zip_map(&ahead, |s, a| s + a));
                let r = push_back(lattice, t, w, &response[t][k]);
                response[t - 1].push(r);
            }
        }
    }
    Ok(EnvelopeTable { gamma, response })
}

/// Same derivatives summed path by path: every later utility slope is carried
/// back to period `t` through the chain of impulse weights on its own, then the
/// contributions are added.
pub fn path_sum_gamma(lattice: &Lattice) -> Result<Vec<Vec<Field>>> {
    let horizon = lattice.horizon();
    let slope = slopes(lattice);
    let impulse = all_impulse_weights(lattice)?;
    let carried = |t: usize, s: usize| {
        (t..s).rev().fold(slope[s - 1].clone(), |g, k| push_back(lattice, k, &impulse[k - 1], &g))
    };
    Ok((1..=horizon)
        .map(|t| {
            (t..=horizon)
                .map(|tau| {
                    (t + 1..=tau).fold(slope[t - 1].clone(), |acc, s| acc.zip_map(&carried(t, s), |a, b| a + b))
                })
                .collect()
        })
        .collect())
}

/// Envelope derivatives against central differences of the forced-exit payoff in
/// the true state, with the report held at each node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub step: f64,
    pub worst_error: f64,
    pub period: usize,
    pub exit_period: usize,
    pub theta: f64,
}

/// `lattice` must carry payments implementing truthful reports; interior nodes only.
pub fn envelope_fd_check(lattice: &Lattice, table: &EnvelopeTable, step: f64) -> Result<EnvelopeCheck> {
    let env = lattice.env();
    let horizon = lattice.horizon();
    let mut out = EnvelopeCheck { step, worst_error: 0.0, period: 1, exit_period: 1, theta: env.grid(1).lo() };
    for tau in 1..=horizon {
        let payoffs = horizon_payoffs(lattice, tau)?;
        // periods are 1-based and index several tables
        #[allow(clippy::needless_range_loop)]
        for t in 1..=tau {
            let grid = lattice.grid(t);
            let layer = lattice.layer(t);
            let weight = env.discount_pow(t);
            let poly = env.agent().poly(t);
            let gamma = table.at(t, tau);
            for c in 0..lattice.contexts(t) {
                for i in 1..grid.len() - 1 {
                    let theta = grid.point(i);
                    let a = layer.allocation[(c, i)];
                    let slice = poly.slice_at_y(a);
                    let payoff = |r: f64| {
                        let now = weight * horner(&slice, r);
                        if tau == t {
                            return now;
                        }
                        let nc = lattice.next_context(t, i);
                        now + lattice.weights_at(t, r, a, None).dot(payoffs[t].row(nc))
                    };
                    let fd = (payoff(theta + step) - payoff(theta - step)) / (2.0 * step);
                    let err = (fd - gamma[(c, i)]).abs();
                    if err > out.worst_error || err.is_nan() {
                        out = EnvelopeCheck { step, worst_error: err, period: t, exit_period: tau, theta };
                    }
                }
            }
        }
    }
    Ok(out)
}
