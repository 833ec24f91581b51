use super::*;
use crate::envlab::{Monomial, Poly2, UtilitySpec};
use crate::error::Error;
use crate::lattice::Lattice;
use crate::paysynth::{synthesize, SynthesisOptions};
use crate::testkit::{optimal_allocation, seller_buyer};
use crate::valsolve::{solve_value, SolverOptions};

const PAPER_OPTIMUM: [f64; 5] = [10.0 / 3.0, 4.0 / 3.0, 1.0, 0.5, 0.5];

fn memory_family() -> AllocationFamily {
    AllocationFamily::Affine { memory: vec![false, true] }
}

fn quick_config() -> OptimizerConfig {
    OptimizerConfig { starts: 2, tolerance: 1e-6, ..OptimizerConfig::default() }
}

fn synthesized_lattice(env: &crate::envlab::Environment) -> Lattice<'_> {
    let alloc = optimal_allocation();
    let base = Lattice::for_allocation(env, &alloc).unwrap();
    let opts = SynthesisOptions { eta: vec![0.0], ..SynthesisOptions::default() };
    synthesize(env, &alloc, &opts).unwrap().lattice(&base).unwrap()
}

#[test]
fn family_layout() {
    let family = memory_family();
    assert_eq!(family.dimension(2), 5);
    assert_eq!(
        family.parameter_names(2),
        ["slope_t1", "intercept_t1", "slope_t2", "prev_slope_t2", "intercept_t2"]
    );
    let env = seller_buyer(21);
    let rule = family.rule(&env, &PAPER_OPTIMUM).unwrap();
    assert_eq!(rule.eval(1, 0.5, None).unwrap(), 10.0 / 6.0 + 4.0 / 3.0);
    assert_eq!(rule.eval(2, 2.0, Some(0.5)).unwrap(), 2.0 + 0.25 + 0.5);
    // Clamped into the declared range.
    assert_eq!(rule.eval(1, 1.0, None).unwrap(), 14.0 / 3.0);
    assert_eq!(family.rule(&env, &[-10.0, 0.0, 0.0, 0.0, 0.0]).unwrap().eval(1, 1.0, None).unwrap(), 0.0);
}

#[test]
fn family_rejects_bad_shapes() {
    let env = seller_buyer(21);
    assert!(matches!(memory_family().rule(&env, &[1.0; 4]), Err(Error::Schema(_))));
    let first_memory = AllocationFamily::Affine { memory: vec![true, false] };
    assert!(matches!(first_memory.validate(2), Err(Error::Memory(_))));
    assert!(matches!(AllocationFamily::Tabular { knots: 9 }.validate(2), Err(Error::Schema(_))));
    assert!(AllocationFamily::Tabular { knots: 8 }.validate(2).is_ok());
}

#[test]
fn tabular_family_interpolates_knots() {
    let env = seller_buyer(21);
    let family = AllocationFamily::Tabular { knots: 3 };
    let rule = family.rule(&env, &[0.0, 1.0, 4.0, 1.0, 1.0, 1.0]).unwrap();
    assert!((rule.eval(1, 0.25, None).unwrap() - 0.5).abs() < 1e-12);
    assert!((rule.eval(1, 0.75, None).unwrap() - 2.5).abs() < 1e-12);
    assert_eq!(family.bounds(&env, 10.0)[0], (0.0, 6.0));
    assert_eq!(family.bounds(&env, 10.0)[3], (0.0, 8.0));
}

#[test]
fn stationary_at_closed_form_optimum() {
    let env = seller_buyer(201);
    let objective = RelaxedObjective::new(&env, memory_family(), &[0.0]).unwrap();
    let gradient = objective.gradient(&PAPER_OPTIMUM, 1e-4).unwrap();
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm <= 1e-4, "gradient {gradient:?}");
}

#[test]
fn one_period_objective_peaks_at_double_state() {
    // η = 1 stops everyone at period 1: -a²/2 + θ + (1+θ)a - (1-θ)a, argmax a = 2θ.
    let env = seller_buyer(101);
    let report = optimize_allocation(&env, &memory_family(), &[1.0], &quick_config()).unwrap();
    assert!((report.params[0] - 2.0).abs() <= 1e-3, "{:?}", report.params);
    assert!(report.params[1].abs() <= 1e-3, "{:?}", report.params);
    // E[2θ² + θ] = 7/6, up to the trapezoid error.
    assert!((report.value - 7.0 / 6.0).abs() <= 1e-4);
}

#[test]
fn no_agent_utility_leaves_expected_principal_flow() {
    let env = seller_buyer(41).with_agent(UtilitySpec::new(vec![Poly2::zero()])).unwrap();
    let params = [1.0, 0.5, 0.5, 0.25, 1.0];
    let parts = RelaxedObjective::new(&env, memory_family(), &[0.0]).unwrap().parts(&params).unwrap();
    assert_eq!(parts.rent, 0.0);
    let lattice = Lattice::for_allocation(&env, &memory_family().rule(&env, &params).unwrap()).unwrap();
    let ahead = lattice.expect_all(1, &lattice.layer(2).principal_flow);
    let direct = env.initial_weights(None).dot(lattice.layer(1).principal_flow.zip_map(&ahead, |a, b| a + b).row(0));
    assert!((parts.value - direct).abs() <= 1e-12, "{} vs {direct}", parts.value);
}

#[test]
fn quadratic_vertex_is_recovered() {
    let found = maximize(&[(-5.0, 5.0)], |x| Ok(3.0 - (x[0] - 0.712_345).powi(2)), &OptimizerConfig::default()).unwrap();
    assert!((found.params[0] - 0.712_345).abs() <= 1e-6);
    assert_eq!(found.restarts.len(), 8);
    // Strongly coupled pair.
    let f = |x: &[f64]| Ok(-(x[0] + x[1] - 1.0).powi(2) - 0.01 * (x[0] - x[1] - 3.0).powi(2));
    let found = maximize(&[(-10.0, 10.0), (-10.0, 10.0)], f, &OptimizerConfig::default()).unwrap();
    assert!((found.params[0] - 2.0).abs() <= 1e-5 && (found.params[1] + 1.0).abs() <= 1e-5, "{:?}", found.params);
    assert!(found.gradient_norm <= 1e-6);
}

#[test]
fn non_finite_objective_is_an_error() {
    let result = maximize(&[(0.0, 1.0)], |x| Ok(if x[0] > 0.5 { f64::NAN } else { x[0] }), &OptimizerConfig::default());
    assert!(matches!(result, Err(Error::NonFinite(_))));
}

#[test]
fn optimizer_is_deterministic() {
    let env = seller_buyer(21);
    let run = || optimize_allocation(&env, &memory_family(), &[0.0], &quick_config()).unwrap();
    assert_eq!(run(), run());
    let other = OptimizerConfig { seed: 7, ..quick_config() };
    let moved = optimize_allocation(&env, &memory_family(), &[0.0], &other).unwrap();
    assert_ne!(moved.restarts[0].start, run().restarts[0].start);
}

#[test]
fn continuing_regime_beats_one_period_regime() {
    let env = seller_buyer(51);
    let config = quick_config();
    let two = optimize_allocation(&env, &memory_family(), &[0.0], &config).unwrap();
    let one = optimize_allocation(&env, &memory_family(), &[1.0], &config).unwrap();
    assert!(two.value > one.value);
    let closed_two = relaxed_objective(&env, &memory_family(), &PAPER_OPTIMUM, &[0.0]).unwrap();
    let closed_one = relaxed_objective(&env, &memory_family(), &[2.0, 0.0, 0.0, 0.0, 0.0], &[1.0]).unwrap();
    assert!((two.value - closed_two).abs() <= 1e-3);
    assert!((one.value - closed_one).abs() <= 1e-3);
    for (p, q) in two.params.iter().zip(PAPER_OPTIMUM) {
        assert!((p - q).abs() <= 2e-2, "{:?}", two.params);
    }
}

#[test]
fn sweep_keeps_best_threshold() {
    let env = seller_buyer(21);
    let sweep = sweep_eta(&env, &memory_family(), &[vec![1.0], vec![0.0], vec![0.5]], &quick_config()).unwrap();
    assert_eq!(sweep.points.len(), 3);
    assert_eq!(sweep.best, 1);
    assert_eq!(sweep.best().eta, vec![0.0]);
    assert!(matches!(sweep_eta(&env, &memory_family(), &[], &quick_config()), Err(Error::Schema(_))));
}

#[test]
fn thresholds_must_cover_and_lie_on_grids() {
    let env = seller_buyer(21);
    assert!(matches!(RelaxedObjective::new(&env, memory_family(), &[]), Err(Error::Schema(_))));
    assert!(matches!(RelaxedObjective::new(&env, memory_family(), &[1.5]), Err(Error::Index(_))));
}

#[test]
fn optimized_allocation_leaves_bottom_state_no_surplus() {
    let env = seller_buyer(51);
    let report = optimize_allocation(&env, &memory_family(), &[0.0], &quick_config()).unwrap();
    let alloc = report.allocation(&env).unwrap();
    let base = Lattice::for_allocation(&env, &alloc).unwrap();
    let opts = SynthesisOptions { eta: vec![0.0], ..SynthesisOptions::default() };
    let lattice = synthesize(&env, &alloc, &opts).unwrap().lattice(&base).unwrap();
    let solution = solve_value(&lattice, SolverOptions::default()).unwrap();
    assert!(solution.period(1).value[(0, 0)].abs() <= 1e-3);
}

#[test]
fn participation_holds_for_synthesized_mechanism() {
    let env = seller_buyer(101);
    let lattice = synthesized_lattice(&env);
    let report = rp_check(&solve_value(&lattice, SolverOptions::default()).unwrap());
    assert!(report.passed);
    assert!(report.bottom_value.abs() <= 1e-3);
}

#[test]
fn participation_fails_after_uniform_charge() {
    let env = seller_buyer(101);
    let lattice = synthesized_lattice(&env);
    // Both transfers move, so every exit plan pays 10 per period it lasts.
    let continuing = (1..=2).map(|t| lattice.layer(t).continuing.map(|v| v - 10.0)).collect();
    let terminal = (1..=2).map(|t| lattice.layer(t).terminal.map(|v| v - 10.0)).collect();
    let charged = lattice.with_payments(continuing, terminal, lattice.posted_prices().to_vec()).unwrap();
    let report = rp_check(&solve_value(&charged, SolverOptions::default()).unwrap());
    assert!(!report.passed, "{report:?}");
}

#[test]
fn participation_holds_without_payments() {
    let env = seller_buyer(41);
    let lattice = Lattice::for_allocation(&env, &optimal_allocation()).unwrap();
    let report = rp_check(&solve_value(&lattice, SolverOptions::default()).unwrap());
    assert!(report.passed && report.ex_ante_value > 0.0);
}

#[test]
fn synthesized_payoffs_rise_with_the_state() {
    let env = seller_buyer(101);
    let report = monotone_payoff_check(&synthesized_lattice(&env)).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn decreasing_utility_breaks_payoff_monotonicity() {
    let env = seller_buyer(101);
    let alloc = optimal_allocation();
    let opts = SynthesisOptions { eta: vec![0.0], ..SynthesisOptions::default() };
    let mech = synthesize(&env, &alloc, &opts).unwrap().mechanism(&env, &alloc).unwrap();
    // (1 - θ) a
    let planted = UtilitySpec::new(vec![Poly2::new(vec![Monomial::new(1.0, 0, 1), Monomial::new(-1.0, 1, 1)])]);
    let planted_env = env.with_agent(planted).unwrap();
    let report = monotone_payoff_check(&Lattice::new(&planted_env, &mech).unwrap()).unwrap();
    assert!(!report.passed);
    assert!(!report.hypothesis_flagged);
}

#[test]
fn constant_utility_gives_flat_payoffs() {
    let env = seller_buyer(41).with_agent(UtilitySpec::new(vec![Poly2::constant(1.0)])).unwrap();
    let lattice = Lattice::for_allocation(&env, &optimal_allocation()).unwrap();
    let report = monotone_payoff_check(&lattice).unwrap();
    assert!(report.passed);
    assert_eq!(report.worst_drop, 0.0);
}
