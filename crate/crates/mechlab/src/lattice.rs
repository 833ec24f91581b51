//! A mechanism lowered onto the period grids.
//!
//! Period `t` carries one row of node values per *context*. A period whose
//! rules depend on the previous report has one context per node of grid
//! `t - 1`; every other period has a single context. Moving from node `i` of
//! period `t` lands in context `i` of period `t + 1` when that period has
//! memory, and in context 0 otherwise.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::envlab::{horner, Environment, PeriodGrid, Poly2, Weights};
use crate::error::{Error, Result};
use crate::mechcore::{AllocationRule, Mechanism, PaymentRules, StateFn};
use crate::par::map_range;

/// Node values per context for one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    rows: Vec<Vec<f64>>,
}

impl Field {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn filled(contexts: usize, nodes: usize, value: f64) -> Self {
        Self { rows: vec![vec![value; nodes]; contexts] }
    }

    pub fn from_fn(contexts: usize, nodes: usize, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Self {
        let rows = map_range(contexts, |c| (0..nodes).map(|i| f(c, i)).collect());
        Self { rows }
    }

    pub fn contexts(&self) -> usize {
        self.rows.len()
    }

    pub fn nodes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.rows[c]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().flatten().copied()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;

    fn index(&self, (c, i): (usize, usize)) -> &f64 {
        &self.rows[c][i]
    }
}

impl IndexMut<(usize, usize)> for Field {
    fn index_mut(&mut self, (c, i): (usize, usize)) -> &mut f64 {
        &mut self.rows[c][i]
    }
}

/// One period of a lowered mechanism.
#[derive(Debug, Clone)]
pub struct Layer {
    pub period: usize,
    pub allocation: Field,
    pub continuing: Field,
    pub terminal: Field,
    /// Agent utility at the node's own allocation.
    pub agent_flow: Field,
    pub principal_flow: Field,
    /// State derivative of the agent utility at the node's own allocation.
    pub agent_slope: Field,
    /// Transition weights onto the next grid; empty in the last period.
    pub next: Vec<Vec<Weights>>,
}

/// Which weights drive a propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The transition law itself.
    Kernel,
    /// The state-derivative of the transition law (impulse response).
    Impulse,
}

/// Mechanism lowered onto the grids of an environment.
#[derive(Debug, Clone)]
pub struct Lattice<'e> {
    env: &'e Environment,
    memory: Vec<bool>,
    layers: Vec<Layer>,
    posted: Vec<f64>,
}

impl<'e> Lattice<'e> {
    pub fn new(env: &'e Environment, mech: &Mechanism) -> Result<Self> {
        mech.assert_final_posted_zero()?;
        Self::lower(env, mech.allocation(), mech.payments())
    }

    /// Allocation only; every payment is zero.
    pub fn for_allocation(env: &'e Environment, alloc: &AllocationRule) -> Result<Self> {
        Self::lower(env, alloc, &PaymentRules::zero(alloc.horizon()))
    }

    fn lower(env: &'e Environment, alloc: &AllocationRule, pay: &PaymentRules) -> Result<Self> {
        let horizon = env.horizon();
        if alloc.horizon() != horizon || pay.horizon() != horizon {
            return Err(Error::Schema(format!(
                "mechanism covers {} periods, environment horizon is {horizon}",
                alloc.horizon()
            )));
        }
        let memory = alloc.memory_flags().to_vec();
        let mut layers = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let grid = env.grid(t);
            let contexts = if memory[t - 1] { env.grid(t - 1).len() } else { 1 };
            let prev = |c: usize| memory[t - 1].then(|| env.grid(t - 1).point(c));
            let eval_rows = |f: &dyn Fn(f64, Option<f64>) -> Result<f64>| -> Result<Field> {
                let rows: Result<Vec<Vec<f64>>> = (0..contexts)
                    .map(|c| grid.points().iter().map(|&x| f(x, prev(c))).collect())
                    .collect();
                Ok(Field::new(rows?))
            };
            let allocation = eval_rows(&|x, p| alloc.eval(t, x, p))?;
            let payment_rows = |f: &StateFn| -> Result<Field> {
                if f.is_zero() {
                    Ok(Field::filled(contexts, grid.len(), 0.0))
                } else {
                    eval_rows(&|x, p| f.eval(x, p))
                }
            };
            let continuing = payment_rows(pay.continuing(t))?;
            let terminal = payment_rows(pay.terminal(t))?;
            let mut layer = Layer {
                period: t,
                allocation,
                continuing,
                terminal,
                agent_flow: Field::new(Vec::new()),
                principal_flow: Field::new(Vec::new()),
                agent_slope: Field::new(Vec::new()),
                next: Vec::new(),
            };
            fill_flows(env, &mut layer);
            layers.push(layer);
        }
        let mut lattice = Self { env, memory, layers, posted: pay.posted_prices().to_vec() };
        lattice.fill_transitions();
        Ok(lattice)
    }

    /// Same allocation with payments given directly on the grid.
    pub fn with_payments(&self, continuing: Vec<Field>, terminal: Vec<Field>, posted: Vec<f64>) -> Result<Self> {
        let horizon = self.horizon();
        if continuing.len() != horizon || terminal.len() != horizon || posted.len() != horizon {
            return Err(Error::Schema("payment tables must cover every period".into()));
        }
        if posted[horizon - 1] != 0.0 {
            return Err(Error::Schema(format!("posted price at the final period is {}", posted[horizon - 1])));
        }
        let mut out = self.clone();
        for (layer, (phi, xi)) in out.layers.iter_mut().zip(continuing.into_iter().zip(terminal)) {
            let shape = (layer.allocation.contexts(), layer.allocation.nodes());
            if (phi.contexts(), phi.nodes()) != shape || (xi.contexts(), xi.nodes()) != shape {
                return Err(Error::Schema(format!("payment table shape mismatch at period {}", layer.period)));
            }
            layer.continuing = phi;
            layer.terminal = xi;
        }
        out.posted = posted;
        Ok(out)
    }

    pub fn with_posted(&self, posted: Vec<f64>) -> Result<Self> {
        let continuing = self.layers.iter().map(|l| l.continuing.clone()).collect();
        let terminal = self.layers.iter().map(|l| l.terminal.clone()).collect();
        self.with_payments(continuing, terminal, posted)
    }

    fn fill_transitions(&mut self) {
        let horizon = self.horizon();
        for t in 1..horizon {
            let env = self.env;
            let grid = env.grid(t);
            let next_grid = env.grid(t + 1);
            let kernel = env.kernel(t);
            let alloc = &self.layers[t - 1].allocation;
            let next = map_range(alloc.contexts(), |c| {
                (0..grid.len())
                    .map(|i| kernel.weights(next_grid, grid.point(i), alloc[(c, i)], None))
                    .collect()
            });
            self.layers[t - 1].next = next;
        }
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    pub fn horizon(&self) -> usize {
        self.env.horizon()
    }

    pub fn grid(&self, t: usize) -> &'e PeriodGrid {
        self.env.grid(t)
    }

    pub fn layer(&self, t: usize) -> &Layer {
        &self.layers[t - 1]
    }

    pub fn contexts(&self, t: usize) -> usize {
        self.layers[t - 1].allocation.contexts()
    }

    pub fn has_memory(&self, t: usize) -> bool {
        self.memory[t - 1]
    }

    /// Context of period `t + 1` reached from node `i` of period `t`.
    pub fn next_context(&self, t: usize, i: usize) -> usize {
        if self.memory[t] {
            i
        } else {
            0
        }
    }

    /// Previous report represented by context `c` of period `t`.
    pub fn prev_report(&self, t: usize, c: usize) -> Option<f64> {
        self.memory[t - 1].then(|| self.env.grid(t - 1).point(c))
    }

    /// `ρ(t)`.
    pub fn posted(&self, t: usize) -> f64 {
        self.posted[t - 1]
    }

    pub fn posted_prices(&self) -> &[f64] {
        &self.posted
    }

    /// `E[g(θ_{t+1}) | node i, context c]` under the node's own allocation.
    pub fn expect(&self, t: usize, c: usize, i: usize, g: &Field) -> f64 {
        self.layers[t - 1].next[c][i].dot(g.row(self.next_context(t, i)))
    }

    /// [`Self::expect`] at every node of period `t`.
    pub fn expect_all(&self, t: usize, g: &Field) -> Field {
        let n = self.grid(t).len();
        Field::from_fn(self.contexts(t), n, |c, i| self.expect(t, c, i, g))
    }

    /// Transition weights from an arbitrary `(θ, a)` of period `t`; with `cut`, only
    /// next states above it.
    pub fn weights_at(&self, t: usize, theta: f64, a: f64, cut: Option<f64>) -> Weights {
        self.env.kernel(t).weights(self.grid(t + 1), theta, a, cut)
    }

    pub fn measure_weights(&self, t: usize, theta: f64, a: f64, cut: Option<f64>, measure: Measure) -> Result<Weights> {
        match measure {
            Measure::Kernel => Ok(self.weights_at(t, theta, a, cut)),
            Measure::Impulse => self.env.kernel(t).impulse_weights(self.grid(t + 1), theta, a, cut),
        }
    }

    /// Impulse weights at every node of period `t < T`.
    pub fn impulse_weights(&self, t: usize) -> Result<Vec<Vec<Weights>>> {
        let grid = self.grid(t);
        let alloc = &self.layers[t - 1].allocation;
        map_range(alloc.contexts(), |c| {
            (0..grid.len())
                .map(|i| self.measure_weights(t, grid.point(i), alloc[(c, i)], None, Measure::Impulse))
                .collect::<Result<Vec<_>>>()
        })
        .into_iter()
        .collect()
    }

    /// Expected sum of per-period `flows` accrued up to and including the exit
    /// period of the threshold rule `θ_t ≤ cutoffs[t-1]`. Period-1 mass is
    /// weighted by `initial_factor` when given; later transitions use `measure`.
    pub fn survival_sum(
        &self,
        flows: &[Field],
        cutoffs: &[f64],
        measure: Measure,
        initial_factor: Option<&[f64]>,
    ) -> Result<f64> {
        let horizon = self.horizon();
        if flows.len() != horizon || cutoffs.len() < horizon.saturating_sub(1) {
            return Err(Error::Schema("survival sum needs one flow field per period and T-1 cutoffs".into()));
        }
        // continuation[t-1][c][i]: expected flows from t+1 on, given node i of period t continues
        let mut continuation = Field::filled(self.contexts(horizon), self.grid(horizon).len(), 0.0);
        for t in (1..horizon).rev() {
            let grid = self.grid(t);
            let alloc = &self.layers[t - 1].allocation;
            let next_flow = &flows[t];
            let next_cont = &continuation;
            let later_cut = (t + 1 < horizon).then(|| cutoffs[t]);
            let rows: Result<Vec<Vec<f64>>> = map_range(alloc.contexts(), |c| {
                (0..grid.len())
                    .map(|i| {
                        let (theta, a) = (grid.point(i), alloc[(c, i)]);
                        let nc = self.next_context(t, i);
                        let full = match measure {
                            Measure::Kernel => self.layers[t - 1].next[c][i].dot(next_flow.row(nc)),
                            Measure::Impulse => {
                                self.measure_weights(t, theta, a, None, measure)?.dot(next_flow.row(nc))
                            }
                        };
                        let tail = match later_cut {
                            Some(cut) => {
                                self.measure_weights(t, theta, a, Some(cut), measure)?.dot(next_cont.row(nc))
                            }
                            None => 0.0,
                        };
                        Ok(full + tail)
                    })
                    .collect()
            })
            .into_iter()
            .collect();
            continuation = Field::new(rows?);
        }
        let factor = |w: Weights| match initial_factor {
            Some(f) => w.weighted_by(|j| f[j]),
            None => w,
        };
        let full = factor(self.env.initial_weights(None));
        let mut total = full.dot(flows[0].row(0));
        if horizon > 1 {
            let cut = factor(self.env.initial_weights(Some(cutoffs[0])));
            total += cut.dot(continuation.row(0));
        }
        Ok(total)
    }
}

fn fill_flows(env: &Environment, layer: &mut Layer) {
    let t = layer.period;
    let grid = env.grid(t);
    let alloc = &layer.allocation;
    // One slice per node, shared by every context row.
    let at = |poly: &Poly2| {
        let slices: Vec<Vec<f64>> = grid.points().iter().map(|&x| poly.slice_at_x(x)).collect();
        Field::new(
            alloc
                .rows()
                .iter()
                .map(|row| slices.iter().zip(row).map(|(s, &a)| horner(s, a)).collect())
                .collect(),
        )
    };
    layer.agent_flow = at(env.agent().poly(t));
    layer.principal_flow = at(env.principal().poly(t));
    layer.agent_slope = at(env.agent().derivative_poly(t));
}
