use serde::Serialize;

use super::potentials::PotentialTable;
use crate::envlab::horner;
use crate::error::Result;
use crate::lattice::{Field, Lattice};
use crate::par::map_range;
use crate::valsolve::horizon_payoffs;

pub const SUFFICIENCY_SLACK: f64 = 1e-6;

/// Smallest slack of one family of inequalities and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackEntry {
    pub slack: f64,
    pub period: usize,
    pub context: usize,
    pub theta: f64,
    pub theta_hat: f64,
}

impl SlackEntry {
    fn worse(self, other: SlackEntry) -> SlackEntry {
        if other.slack < self.slack || other.slack.is_nan() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyReport {
    /// Exit-now potential differences against the exit-now length.
    pub stop: SlackEntry,
    /// Continuing potential differences against the best forced-exit length.
    pub cont: SlackEntry,
    /// Continuing potential minus exit-now potential (zero in the last period).
    pub order: SlackEntry,
    pub passed: bool,
}

/// Lengths from true node `i` to report node `j` at period `t`, context `c`:
/// the exit-now length and the best forced-exit length.
pub struct Lengths<'a> {
    lattice: &'a Lattice<'a>,
    /// `payoffs[τ-1][s-1]`: forced-exit payoff at period `s` without the posted price.
    payoffs: Vec<Vec<Field>>,
}

impl<'a> Lengths<'a> {
    /// `lattice` carries the payments whose terminal part enters the lengths.
    pub fn new(lattice: &'a Lattice<'a>) -> Result<Self> {
        let payoffs = (1..=lattice.horizon())
            .map(|tau| {
                let rho = lattice.posted(tau);
                horizon_payoffs(lattice, tau).map(|fs| fs.into_iter().map(|f| f.map(|v| v - rho)).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { lattice, payoffs })
    }

    /// Both lengths for every `(i, j)` of one period and context, rows by true node.
    pub fn matrices(&self, t: usize, c: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let l = self.lattice;
        let env = l.env();
        let grid = l.grid(t);
        let layer = l.layer(t);
        let weight = env.discount_pow(t);
        let poly = env.agent().poly(t);
        let n = grid.len();
        let own: Vec<Vec<f64>> = (t + 1..=l.horizon())
            .map(|tau| (0..n).map(|j| l.expect(t, c, j, &self.payoffs[tau - 1][t])).collect())
            .collect();
        let rows = map_range(n, |i| {
            let theta = grid.point(i);
            // Sliced at the true state, as the lattice flows are, so the diagonal is exactly zero.
            let slice = poly.slice_at_x(theta);
            let mut stop = Vec::with_capacity(n);
            let mut cont = Vec::with_capacity(n);
            // the report index addresses the allocation, flow and forced-exit tables together
            #[allow(clippy::needless_range_loop)]
            for j in 0..n {
                let exit = weight * (layer.agent_flow[(c, j)] - horner(&slice, layer.allocation[(c, j)]));
                let a = layer.allocation[(c, j)];
                let mut best = exit;
                if t < l.horizon() {
                    let nc = l.next_context(t, j);
                    let w = l.weights_at(t, theta, a, None);
                    for tau in t + 1..=l.horizon() {
                        best = best.max(exit + own[tau - t - 1][j] - w.dot(self.payoffs[tau - 1][t].row(nc)));
                    }
                }
                stop.push(exit);
                cont.push(best);
            }
            (stop, cont)
        });
        rows.into_iter().unzip()
    }
}

pub fn verify_sufficiency(lattice: &Lattice, pot: &PotentialTable) -> Result<SufficiencyReport> {
    let lengths = Lengths::new(lattice)?;
    let init = |t| SlackEntry { slack: f64::INFINITY, period: t, context: 0, theta: 0.0, theta_hat: 0.0 };
    let (mut stop, mut cont, mut order) = (init(1), init(1), init(1));
    for t in 1..=lattice.horizon() {
        let grid = lattice.grid(t);
        for c in 0..lattice.contexts(t) {
            let (ls, lc) = lengths.matrices(t, c);
            let (bs, bc) = (pot.stop[t - 1].row(c), pot.cont[t - 1].row(c));
            for i in 0..grid.len() {
                for j in 0..grid.len() {
                    let at = |slack| SlackEntry { slack, period: t, context: c, theta: grid.point(i), theta_hat: grid.point(j) };
                    stop = stop.worse(at(ls[i][j] - (bs[j] - bs[i])));
                    cont = cont.worse(at(lc[i][j] - (bc[j] - bc[i])));
                }
                let gap = bc[i] - bs[i];
                let slack = if t == lattice.horizon() { -gap.abs() } else { gap };
                let theta = grid.point(i);
                order = order.worse(SlackEntry { slack, period: t, context: c, theta, theta_hat: theta });
            }
        }
    }
    let passed = [stop, cont, order].iter().all(|e| e.slack >= -SUFFICIENCY_SLACK);
    Ok(SufficiencyReport { stop, cont, order, passed })
}
