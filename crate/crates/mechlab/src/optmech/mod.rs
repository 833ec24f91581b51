//! The principal's relaxed problem over parametric allocation families.
//!
//! The objective is expected total surplus minus the information rent carried
//! by the first-period hazard rate through the impulse responses. It is
//! maximized by derivative-free coordinate search with fixed exit thresholds;
//! thresholds are swept on a grid rather than optimized jointly.

mod checks;
mod family;
mod objective;
mod search;

pub use checks::{monotone_payoff_check, rp_check, MonotoneReport, ParticipationReport, MONOTONE_SLACK, PARTICIPATION_SLACK};
pub use family::{AllocationFamily, MAX_DIMENSION};
pub use objective::{relaxed_objective, ObjectiveParts, RelaxedObjective};
pub use search::{maximize, OptimizerConfig, Restart, SearchResult};

use serde::Serialize;

use crate::envlab::Environment;
use crate::error::{Error, Result};
use crate::mechcore::AllocationRule;
use crate::par::map_range;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerReport {
    pub family: AllocationFamily,
    pub parameter_names: Vec<String>,
    pub eta: Vec<f64>,
    pub params: Vec<f64>,
    pub value: f64,
    pub surplus: f64,
    pub rent: f64,
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
    pub best_restart: usize,
    pub restart_values: Vec<f64>,
    pub restarts: Vec<Restart>,
    pub evaluations: usize,
}

impl OptimizerReport {
    pub fn allocation(&self, env: &Environment) -> Result<AllocationRule> {
        self.family.rule(env, &self.params)
    }
}

/// Best member of `family` for fixed thresholds `eta`.
pub fn optimize_allocation(
    env: &Environment,
    family: &AllocationFamily,
    eta: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizerReport> {
    let objective = RelaxedObjective::new(env, family.clone(), eta)?;
    let bounds = family.bounds(env, config.coefficient_bound);
    let found = maximize(&bounds, |x| objective.value(x), config)?;
    let parts = objective.parts(&found.params)?;
    Ok(OptimizerReport {
        family: family.clone(),
        parameter_names: family.parameter_names(env.horizon()),
        eta: objective.eta().to_vec(),
        params: found.params,
        value: parts.value,
        surplus: parts.surplus,
        rent: parts.rent,
        gradient: found.gradient,
        gradient_norm: found.gradient_norm,
        best_restart: found.best_restart,
        restart_values: found.restarts.iter().map(|r| r.value).collect(),
        evaluations: found.restarts.iter().map(|r| r.evaluations).sum(),
        restarts: found.restarts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSweep {
    pub points: Vec<OptimizerReport>,
    pub best: usize,
}

impl EtaSweep {
    pub fn best(&self) -> &OptimizerReport {
        &self.points[self.best]
    }
}

/// Optimizes the allocation at every threshold vector and keeps the best pair.
pub fn sweep_eta(
    env: &Environment,
    family: &AllocationFamily,
    etas: &[Vec<f64>],
    config: &OptimizerConfig,
) -> Result<EtaSweep> {
    if etas.is_empty() {
        return Err(Error::Schema("threshold sweep is empty".into()));
    }
    let points = map_range(etas.len(), |k| optimize_allocation(env, family, &etas[k], config))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = (0..points.len())
        .reduce(|b, k| if points[k].value > points[b].value { k } else { b })
        .expect("nonempty sweep");
    Ok(EtaSweep { points, best })
}

#[cfg(test)]
mod tests;
