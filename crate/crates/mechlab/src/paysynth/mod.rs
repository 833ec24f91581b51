//! Payment synthesis from an allocation rule.
//!
//! The pipeline runs envelope derivatives, then potentials, then state-dependent
//! payments, then posted prices. Payments come out as grid tables; memory
//! periods get one row per previous report.

mod envelope;
mod equivalence;
mod payments;
mod potentials;
mod sufficiency;

pub use envelope::{envelope_fd_check, envelope_gamma, path_sum_gamma, EnvelopeCheck, EnvelopeTable};
pub use equivalence::{revenue_equivalence, EquivalenceReport, EQUIVALENCE_TOLERANCE};
pub use payments::{construct_phi_xi, construct_rho, regular_set_membership, PaymentTables, RegularSetReport};
pub use potentials::{default_anchors, potentials, PotentialTable};
pub use sufficiency::{verify_sufficiency, Lengths, SlackEntry, SufficiencyReport, SUFFICIENCY_SLACK};

use crate::envlab::Environment;
use crate::error::Result;
use crate::lattice::{Field, Lattice};
use crate::mechcore::{AllocationRule, ContextTable, Mechanism, NodeTable, PaymentRules, StateFn};
use crate::valsolve::{solve_value, SolverOptions};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthesisOptions {
    /// Integration anchors; grid bottoms when absent.
    pub anchors: Option<Vec<f64>>,
    /// Exit thresholds for periods `1..T`.
    pub eta: Vec<f64>,
    /// Discount the terminal potential by one period instead of `t`.
    pub strict_literal: bool,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub envelope: EnvelopeTable,
    pub potentials: PotentialTable,
    pub payments: PaymentTables,
    pub posted: Vec<f64>,
    pub eta: Vec<f64>,
    /// Continuing minus exit-now potential at each threshold.
    pub threshold_spread: Vec<f64>,
    /// Constant added to the first-period payments by [`Synthesis::rebase_bottom_surplus`].
    pub bottom_shift: f64,
}

impl Synthesis {
    /// `base` must be the allocation lattice the synthesis ran on.
    pub fn lattice<'e>(&self, base: &Lattice<'e>) -> Result<Lattice<'e>> {
        base.with_payments(self.payments.continuing.clone(), self.payments.terminal.clone(), self.posted.clone())
    }

    /// Payment tables as mechanism rules over the environment grids.
    pub fn mechanism(&self, env: &Environment, alloc: &AllocationRule) -> Result<Mechanism> {
        let table = |t: usize, f: &Field| -> Result<StateFn> {
            let points = env.grid(t).points().to_vec();
            if alloc.has_memory(t) {
                let prev = env.grid(t - 1).points().to_vec();
                Ok(StateFn::Contexts(ContextTable::new(prev, points, f.rows().to_vec())?))
            } else {
                Ok(StateFn::Nodes(NodeTable::new(points, f.row(0).to_vec())?))
            }
        };
        let horizon = env.horizon();
        let continuing = (1..=horizon).map(|t| table(t, &self.payments.continuing[t - 1])).collect::<Result<_>>()?;
        let terminal = (1..=horizon).map(|t| table(t, &self.payments.terminal[t - 1])).collect::<Result<_>>()?;
        Mechanism::new(alloc.clone(), PaymentRules::new(continuing, terminal, self.posted.clone())?)
    }

    /// Shifts both first-period payments by one constant so that the bottom
    /// first-period state has zero value; returns the value removed. Both exit
    /// branches move together, so reports and exits are unchanged.
    pub fn rebase_bottom_surplus(&mut self, base: &Lattice, opts: SolverOptions) -> Result<f64> {
        let lattice = self.lattice(base)?;
        let value = solve_value(&lattice, opts)?.period(1).value[(0, 0)];
        let shift = value / base.env().discount();
        self.payments.continuing[0] = self.payments.continuing[0].map(|v| v - shift);
        self.payments.terminal[0] = self.payments.terminal[0].map(|v| v - shift);
        self.bottom_shift -= shift;
        Ok(value)
    }
}

/// Envelope table, potentials, payments and posted prices for `base`'s allocation.
pub fn synthesize_on(base: &Lattice, opts: &SynthesisOptions) -> Result<Synthesis> {
    let env = base.env();
    let envelope = envelope_gamma(base)?;
    let anchors = opts.anchors.clone().unwrap_or_else(|| default_anchors(env));
    let pot = potentials(base, &envelope, &anchors)?;
    let payments = construct_phi_xi(base, &pot, opts.strict_literal);
    let posted = construct_rho(base, &pot, &opts.eta)?;
    let threshold_spread = (1..env.horizon())
        .map(|t| {
            let grid = env.grid(t);
            grid.interpolate(pot.spread(t).row(0), opts.eta[t - 1])
        })
        .collect();
    Ok(Synthesis {
        envelope,
        potentials: pot,
        payments,
        posted,
        eta: opts.eta[..env.horizon() - 1].to_vec(),
        threshold_spread,
        bottom_shift: 0.0,
    })
}

pub fn synthesize(env: &Environment, alloc: &AllocationRule, opts: &SynthesisOptions) -> Result<Synthesis> {
    let base = Lattice::for_allocation(env, alloc)?;
    synthesize_on(&base, opts)
}
