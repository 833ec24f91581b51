//! Acceptance battery: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{cycled, random_instance, Payments};
use mechlab::envlab::checks::check_fosd;
use mechlab::envlab::Environment;
use mechlab::icver::{brute_force_deviation_oracle, one_shot_check, DEFAULT_BUDGET};
use mechlab::lattice::Lattice;
use mechlab::mechcore::{ReportingStrategy, StoppingPolicy};
use mechlab::optmech::optimize_allocation;
use mechlab::paysynth::{default_anchors, envelope_fd_check, regular_set_membership, revenue_equivalence, synthesize_on};
use mechlab::simcli::{monte_carlo, ScenarioConfig};
use mechlab::valsolve::{check_single_crossing, mean_first_passage, payoff_representation_check, solve_value, SolverOptions};
use mechlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCENARIO: &str = "seller_buyer_T2.json";
const NODES: usize = 201;
const PARAM_TOLERANCE: f64 = 2e-2;
const OPTIMIZE_BUDGET: Duration = Duration::from_secs(120);
const PASSAGE_TOLERANCE: f64 = 1e-9;
const MC_PATHS: usize = 100_000;
const MC_TOLERANCE: f64 = 0.01;
const IC_TOLERANCE: f64 = 1e-3;
const FINE_NODES: usize = 801;
const FINE_IC_TOLERANCE: f64 = 2.5e-4;
const RANDOM_INSTANCES: usize = 50;
const ORACLE_TOLERANCE: f64 = 1e-7;
const TELESCOPING_TOLERANCE: f64 = 1e-6;
const TELESCOPING_INSTANCES: usize = 20;
const ENVELOPE_TOLERANCE: f64 = 1e-4;
const ENVELOPE_STEP: f64 = 1e-5;
const EQUIVALENCE_TOLERANCE: f64 = 1e-6;
const BOTTOM_TOLERANCE: f64 = 1e-3;
const SWEEP_POINTS: usize = 21;
const PRICE_BUMP: f64 = 0.1;
const IDENTITY_TOLERANCE: f64 = 1e-9;
const SHIFT: f64 = 0.37;

type Verdict = Result<(bool, String)>;

fn scenario(nodes: usize) -> Result<(ScenarioConfig, Environment)> {
    let mut cfg = ScenarioConfig::bundled(SCENARIO).expect("bundled scenario");
    cfg.environment.nodes = nodes;
    let env = cfg.environment()?;
    Ok((cfg, env))
}

fn reference(cfg: &ScenarioConfig) -> Vec<f64> {
    cfg.solver.optimizer.reference.as_ref().expect("reference parameters").iter().map(|n| n.0).collect()
}

fn optimize_at(eta: f64) -> Result<(Vec<f64>, Duration, Vec<f64>)> {
    let (cfg, env) = scenario(NODES)?;
    let start = Instant::now();
    let report = optimize_allocation(&env, &cfg.optimizer_family(), &[eta], &cfg.solver.optimizer.config)?;
    Ok((report.params, start.elapsed(), reference(&cfg)))
}

fn criterion_1() -> Verdict {
    let (found, elapsed, expected) = optimize_at(0.0)?;
    let error = found.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = error <= PARAM_TOLERANCE && elapsed <= OPTIMIZE_BUDGET;
    Ok((pass, format!("params {found:.6?}, max error {error:.2e}, {:.1} s", elapsed.as_secs_f64())))
}

fn criterion_2() -> Verdict {
    let (found, elapsed, _) = optimize_at(1.0)?;
    let (slope, intercept) = (found[0], found[1]);
    let pass = (slope - 2.0).abs() <= PARAM_TOLERANCE && intercept.abs() <= PARAM_TOLERANCE;
    Ok((pass, format!("first-period slope {slope:.6}, intercept {intercept:.6}, {:.1} s", elapsed.as_secs_f64())))
}

/// Synthesized mechanism of the bundled scenario with first-period threshold `eta`.
fn passage(eta: f64, paths: usize) -> Result<(f64, Option<(f64, f64)>)> {
    let (cfg, env) = scenario(NODES)?;
    let alloc = cfg.allocation(&env)?;
    let base = Lattice::for_allocation(&env, &alloc)?;
    let mut opts = cfg.synthesis_options();
    opts.eta = vec![eta];
    let synth = synthesize_on(&base, &opts)?;
    let lattice = synth.lattice(&base)?;
    let cutoffs = solve_value(&lattice, cfg.solver_options())?.cutoffs()?;
    let quadrature = mean_first_passage(&lattice, &cutoffs)?;
    if paths == 0 {
        return Ok((quadrature, None));
    }
    let mech = synth.mechanism(&env, &alloc)?;
    let policy = StoppingPolicy::threshold(&cutoffs, env.grid(env.horizon()).hi());
    let stats = monte_carlo(&env, &mech, &ReportingStrategy::truthful(), &policy, paths, cfg.simulation.seed)?;
    Ok((quadrature, Some((stats.stop_time.mean, stats.stop_time.stderr))))
}

fn criterion_3() -> Verdict {
    let (at_bottom, _) = passage(0.0, 0)?;
    let (at_top, _) = passage(1.0, 0)?;
    let (inner, mc) = passage(0.25, MC_PATHS)?;
    let (mc_mean, mc_err) = mc.expect("simulated");
    let pass = at_bottom == 2.0
        && at_top == 1.0
        && (inner - 1.75).abs() <= PASSAGE_TOLERANCE
        && (mc_mean - 1.75).abs() <= MC_TOLERANCE;
    Ok((
        pass,
        format!("threshold 0: {at_bottom}, threshold 1: {at_top}, threshold 0.25: {inner:.12} (MC {mc_mean:.4} ± {mc_err:.1e})"),
    ))
}

fn synthesized_gap(nodes: usize) -> Result<(bool, f64)> {
    let (cfg, env) = scenario(nodes)?;
    let alloc = cfg.allocation(&env)?;
    let base = Lattice::for_allocation(&env, &alloc)?;
    let lattice = synthesize_on(&base, &cfg.synthesis_options())?.lattice(&base)?;
    let solution = solve_value(&lattice, cfg.solver_options())?;
    let report = one_shot_check(&lattice, &solution, IC_TOLERANCE);
    Ok((report.verdict && report.bellman_verdict, report.worst_gap.max(report.worst_bellman_gap)))
}

fn criterion_4() -> Verdict {
    let (coarse_pass, coarse) = synthesized_gap(NODES)?;
    let (fine_pass, fine) = synthesized_gap(FINE_NODES)?;
    let pass = coarse_pass && coarse <= IC_TOLERANCE && fine_pass && fine <= FINE_IC_TOLERANCE;
    Ok((pass, format!("worst gap {coarse:.2e} at {NODES} nodes, {fine:.2e} at {FINE_NODES} nodes")))
}

/// Payment kind, horizon and node count of the `k`-th random instance.
fn small_shape(k: usize, rng: &mut ChaCha8Rng) -> (Payments, usize, usize) {
    let kind = cycled(k);
    let horizon = 1 + k % 3;
    let nodes = if horizon == 3 { rng.gen_range(3..=6) } else { rng.gen_range(3..=9) };
    (kind, horizon, nodes)
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut passing) = (0, 0);
    let mut mismatches = Vec::new();
    for k in 0..RANDOM_INSTANCES {
        let (kind, horizon, nodes) = small_shape(k, &mut rng);
        let inst = random_instance(&mut rng, horizon, nodes, kind);
        let lattice = Lattice::new(&inst.env, &inst.mech)?;
        let solution = solve_value(&lattice, SolverOptions::default())?;
        let report = one_shot_check(&lattice, &solution, ORACLE_TOLERANCE);
        let oracle = brute_force_deviation_oracle(&inst.env, &inst.mech, DEFAULT_BUDGET, ORACLE_TOLERANCE)?;
        passing += usize::from(report.bellman_verdict);
        if report.bellman_verdict == !oracle.profitable {
            agree += 1;
        } else {
            mismatches.push(k);
        }
    }
    let detail = format!(
        "{agree}/{RANDOM_INSTANCES} agree ({passing} incentive compatible, {} not){}",
        RANDOM_INSTANCES - passing,
        if mismatches.is_empty() { String::new() } else { format!(", mismatches at {mismatches:?}") }
    );
    Ok((agree == RANDOM_INSTANCES, detail))
}

/// Worst telescoping gap over every forced exit period.
fn telescoping_gap(lattice: &Lattice) -> Result<f64> {
    let solution = solve_value(lattice, SolverOptions::default())?;
    (1..=lattice.horizon()).try_fold(0.0f64, |worst, tau| {
        let report = payoff_representation_check(lattice, &solution, tau)?;
        Ok(worst.max(report.interim_gap).max(report.ex_ante_gap))
    })
}

fn criterion_6() -> Verdict {
    let (cfg, env) = scenario(NODES)?;
    let base = Lattice::for_allocation(&env, &cfg.allocation(&env)?)?;
    let example = telescoping_gap(&synthesize_on(&base, &cfg.synthesis_options())?.lattice(&base)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut random: f64 = 0.0;
    for k in 0..TELESCOPING_INSTANCES {
        let kind = cycled(k);
        let nodes = rng.gen_range(5..=31);
        let inst = random_instance(&mut rng, 1 + k % 3, nodes, kind);
        random = random.max(telescoping_gap(&Lattice::new(&inst.env, &inst.mech)?)?);
    }
    let pass = example <= TELESCOPING_TOLERANCE && random <= TELESCOPING_TOLERANCE;
    Ok((pass, format!("worst gap {example:.2e} on the example, {random:.2e} over {TELESCOPING_INSTANCES} random instances")))
}

fn criterion_7() -> Verdict {
    let (cfg, env) = scenario(NODES)?;
    let base = Lattice::for_allocation(&env, &cfg.allocation(&env)?)?;
    let synth = synthesize_on(&base, &cfg.synthesis_options())?;
    let check = envelope_fd_check(&synth.lattice(&base)?, &synth.envelope, ENVELOPE_STEP)?;
    Ok((
        check.worst_error <= ENVELOPE_TOLERANCE,
        format!("worst error {:.2e} at period {} exit {} state {:.3}", check.worst_error, check.period, check.exit_period, check.theta),
    ))
}

fn criterion_8() -> Verdict {
    let (cfg, env) = scenario(NODES)?;
    let base = Lattice::for_allocation(&env, &cfg.allocation(&env)?)?;
    let anchors_a = default_anchors(&env);
    let anchors_b: Vec<f64> = (1..=env.horizon()).map(|t| env.grid(t).point(env.grid(t).len() / 3)).collect();
    let report = revenue_equivalence(&base, &anchors_a, &anchors_b, &cfg.synthesis_options().eta)?;
    let shifts = &report.posted_shift;
    let last = *shifts.last().expect("posted prices");
    let pass = report.max_state_deviation <= EQUIVALENCE_TOLERANCE && shifts.iter().all(|s| s.is_finite()) && last == 0.0;
    Ok((
        pass,
        format!(
            "state deviation {:.2e}, per-exit constants {:.6?}, posted shift per period {:.6?}",
            report.max_state_deviation, report.constants, shifts
        ),
    ))
}

fn criterion_9() -> Verdict {
    let (cfg, env) = scenario(NODES)?;
    let base = Lattice::for_allocation(&env, &cfg.allocation(&env)?)?;
    let lattice = synthesize_on(&base, &cfg.synthesis_options())?.lattice(&base)?;
    let bottom = solve_value(&lattice, cfg.solver_options())?.period(1).value[(0, 0)];
    Ok((bottom.abs() <= BOTTOM_TOLERANCE, format!("bottom first-period value {bottom:.3e}")))
}

fn criterion_10() -> Verdict {
    let (cfg, env) = scenario(NODES)?;
    let base = Lattice::for_allocation(&env, &cfg.allocation(&env)?)?;
    let grid = env.grid(1);
    let cell = grid.point(1) - grid.point(0);
    let (mut members, mut worst_miss, mut rejected, mut exceeded) = (0, 0.0f64, 0, 0);
    for k in 0..SWEEP_POINTS {
        let eta = grid.lo() + (grid.hi() - grid.lo()) * k as f64 / (SWEEP_POINTS - 1) as f64;
        let mut opts = cfg.synthesis_options();
        opts.eta = vec![eta];
        let synth = synthesize_on(&base, &opts)?;
        let report = regular_set_membership(&base, &synth.potentials, &synth.posted)?;
        let miss = report.eta[0].map_or(f64::INFINITY, |found| (found - eta).abs());
        worst_miss = worst_miss.max(miss);
        members += usize::from(report.member && miss <= cell);
        let mut bumped = synth.posted.clone();
        bumped[0] += PRICE_BUMP;
        if bumped[0] > report.level_max[0] {
            exceeded += 1;
            rejected += usize::from(!regular_set_membership(&base, &synth.potentials, &bumped)?.member);
        }
    }
    let pass = members == SWEEP_POINTS && exceeded > 0 && rejected == exceeded;
    Ok((
        pass,
        format!(
            "{members}/{SWEEP_POINTS} member within one cell (worst miss {worst_miss:.2e}); \
             {rejected}/{exceeded} bumped prices above the level range rejected"
        ),
    ))
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut qualified, mut structured, mut identity, mut shift) = (0, 0, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for k in 0..RANDOM_INSTANCES {
        let nodes = rng.gen_range(9..=41);
        let inst = random_instance(&mut rng, 2 + k % 2, nodes, Payments::Synthesized);
        let lattice = Lattice::new(&inst.env, &inst.mech)?;
        let solution = solve_value(&lattice, SolverOptions::default())?;
        identity = identity.max(solution.identity_gap);
        let crossing = check_single_crossing(&lattice, &solution);
        if check_fosd(&inst.env, &inst.alloc).passed && crossing.passed() {
            qualified += 1;
            let ok = solution.thresholds().is_ok()
                && crossing.marginal_monotone.passed
                && crossing.continuing_free_monotone.passed;
            structured += usize::from(ok);
            if !ok {
                failures.push(k);
            }
        }
        let horizon = lattice.horizon();
        for t in 1..horizon {
            let mut posted = lattice.posted_prices().to_vec();
            posted[t - 1] += SHIFT;
            let moved = solve_value(&lattice.with_posted(posted)?, SolverOptions::default())?;
            let (a, b) = (solution.period(t), moved.period(t));
            shift = shift.max(a.continuing_free.max_abs_diff(&b.continuing_free));
            let drop = a.continuing.zip_map(&b.continuing, |x, y| x - y);
            shift = drop.values().fold(shift, |m, d| m.max((d - SHIFT).abs()));
        }
    }
    let pass = qualified > 0 && structured == qualified && identity <= IDENTITY_TOLERANCE && shift <= IDENTITY_TOLERANCE;
    Ok((
        pass,
        format!(
            "{structured}/{qualified} instances passing the assumption checks are down-closed and monotone{}; \
             identity gap {identity:.1e}; price-shift error {shift:.1e}",
            if failures.is_empty() { String::new() } else { format!(" (failures {failures:?})") }
        ),
    ))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("optimizer recovers the continuing-regime allocation", criterion_1),
        ("optimizer recovers the one-period allocation", criterion_2),
        ("mean exit period by quadrature and Monte Carlo", criterion_3),
        ("synthesized payments pass the one-shot audit", criterion_4),
        ("one-shot audit and exhaustive oracle agree", criterion_5),
        ("telescoped payoff matches the forced-exit payoff", criterion_6),
        ("envelope derivatives match finite differences", criterion_7),
        ("payments from different anchors differ by constants", criterion_8),
        ("bottom first-period state earns no surplus", criterion_9),
        ("posted prices round-trip through the regular set", criterion_10),
        ("stopping structure and value identities", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {detail} [{:.1} s]", k + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
