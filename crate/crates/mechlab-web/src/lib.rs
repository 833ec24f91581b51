//! Browser bindings: synthesize and audit a mechanism, evaluate the principal's
//! relaxed objective, and simulate exits, all on the bundled two-period scenario
//! or any scenario text the page supplies. Results are JSON strings.

use mechlab::envlab::Environment;
use mechlab::icver::one_shot_check;
use mechlab::lattice::Lattice;
use mechlab::mechcore::{ReportingStrategy, StoppingPolicy};
use mechlab::optmech::{rp_check, RelaxedObjective};
use mechlab::paysynth::synthesize_on;
use mechlab::simcli::{monte_carlo, ScenarioConfig, BUNDLED};
use mechlab::valsolve::{mean_first_passage, solve_value};
use mechlab::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Grids above this size are too slow for an interactive page.
pub const MAX_NODES: usize = 401;
pub const MAX_PATHS: usize = 200_000;

fn scenario(text: &str, nodes: usize, eta: f64) -> Result<ScenarioConfig> {
    if !(2..=MAX_NODES).contains(&nodes) {
        return Err(Error::Schema(format!("grid must have 2 to {MAX_NODES} nodes, got {nodes}")));
    }
    let mut cfg = ScenarioConfig::from_json(text)?;
    cfg.environment.nodes = nodes;
    let periods = cfg.environment.horizon.saturating_sub(1);
    cfg.synthesis.eta = vec![mechlab::simcli::Num(eta); periods];
    Ok(cfg)
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Payments synthesized from the scenario's allocation with every threshold at
/// `eta`, then solved and audited for one-shot misreports.
pub fn synthesize_report(text: &str, nodes: usize, eta: f64) -> Result<Value> {
    let cfg = scenario(text, nodes, eta)?;
    let env = cfg.environment()?;
    let alloc = cfg.allocation(&env)?;
    let base = Lattice::for_allocation(&env, &alloc)?;
    let synthesis = synthesize_on(&base, &cfg.synthesis_options())?;
    let lattice = synthesis.lattice(&base)?;
    let solution = solve_value(&lattice, cfg.solver_options())?;
    let ic = one_shot_check(&lattice, &solution, cfg.solver.ic_tolerance.0);
    let cutoffs = solution.cutoffs()?;
    let first = solution.period(1);
    Ok(json!({
        "theta": first.points,
        "value": first.value.row(0),
        "continuing_payment": synthesis.payments.continuing[0].row(0),
        "terminal_payment": synthesis.payments.terminal[0].row(0),
        "posted": synthesis.posted,
        "cutoffs": cutoffs.iter().map(|&c| finite(c)).collect::<Vec<_>>(),
        "mean_exit_period": mean_first_passage(&lattice, &cutoffs)?,
        "ex_ante_value": solution.ex_ante_value,
        "participation": rp_check(&solution).passed,
        "ic_verdict": ic.verdict,
        "worst_gap": ic.worst_gap,
    }))
}

/// Surplus, information rent and their difference for an affine allocation
/// with the given parameters (slope, optional previous-report slope, intercept per period).
pub fn objective_report(text: &str, nodes: usize, eta: f64, params: &[f64]) -> Result<Value> {
    let cfg = scenario(text, nodes, eta)?;
    let env: Environment = cfg.environment()?;
    let family = cfg.optimizer_family();
    let parts = RelaxedObjective::new(&env, family.clone(), &cfg.synthesis_options().eta)?.parts(params)?;
    Ok(json!({
        "parameter_names": family.parameter_names(env.horizon()),
        "surplus": parts.surplus,
        "rent": parts.rent,
        "value": parts.value,
    }))
}

/// Monte Carlo of the synthesized mechanism under truth-telling and the solved exit rule.
pub fn simulate_report(text: &str, nodes: usize, eta: f64, paths: usize, seed: u64) -> Result<Value> {
    if paths == 0 || paths > MAX_PATHS {
        return Err(Error::Schema(format!("paths must be 1 to {MAX_PATHS}, got {paths}")));
    }
    let cfg = scenario(text, nodes, eta)?;
    let env = cfg.environment()?;
    let alloc = cfg.allocation(&env)?;
    let base = Lattice::for_allocation(&env, &alloc)?;
    let synthesis = synthesize_on(&base, &cfg.synthesis_options())?;
    let lattice = synthesis.lattice(&base)?;
    let mech = synthesis.mechanism(&env, &alloc)?;
    let solution = solve_value(&lattice, cfg.solver_options())?;
    let cutoffs = solution.cutoffs()?;
    let policy = StoppingPolicy::threshold(&cutoffs, env.grid(env.horizon()).hi());
    let stats = monte_carlo(&env, &mech, &ReportingStrategy::truthful(), &policy, paths, seed)?;
    Ok(json!({
        "stats": stats,
        "quadrature_value": solution.ex_ante_value,
        "quadrature_exit_period": mean_first_passage(&lattice, &cutoffs)?,
    }))
}

fn to_js(result: Result<Value>) -> std::result::Result<String, JsValue> {
    result.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Text of the bundled two-period seller-buyer scenario.
#[wasm_bindgen]
pub fn bundled_scenario() -> String {
    BUNDLED[0].1.to_owned()
}

#[wasm_bindgen]
pub fn synthesize(scenario: &str, nodes: usize, eta: f64) -> std::result::Result<String, JsValue> {
    to_js(synthesize_report(scenario, nodes, eta))
}

#[wasm_bindgen]
pub fn objective(scenario: &str, nodes: usize, eta: f64, params: Vec<f64>) -> std::result::Result<String, JsValue> {
    to_js(objective_report(scenario, nodes, eta, &params))
}

#[wasm_bindgen]
pub fn simulate(scenario: &str, nodes: usize, eta: f64, paths: usize, seed: u64) -> std::result::Result<String, JsValue> {
    to_js(simulate_report(scenario, nodes, eta, paths, seed))
}
