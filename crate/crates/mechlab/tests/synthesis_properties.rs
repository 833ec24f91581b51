mod common;

use common::{random_allocation, random_env, random_eta};
use mechlab::envlab::{horner, Environment};
use mechlab::icver::{one_shot_check, DEFAULT_IC_TOLERANCE};
use mechlab::lattice::Lattice;
use mechlab::mechcore::AllocationRule;
use mechlab::paysynth::{
    default_anchors, envelope_gamma, path_sum_gamma, regular_set_membership, revenue_equivalence, synthesize_on,
    verify_sufficiency, SynthesisOptions,
};
use mechlab::valsolve::{horizon_payoffs, solve_value, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATH_SUM_TOLERANCE: f64 = 1e-8;
const ANCHOR_TOLERANCE: f64 = 1e-9;
const EQUIVALENCE_TOLERANCE: f64 = 1e-6;
const ROOT_SLACK: f64 = 1e-9;
const BOTTOM_TOLERANCE: f64 = 1e-9;

struct Setup {
    env: Environment,
    alloc: AllocationRule,
    eta: Vec<f64>,
    rng: ChaCha8Rng,
}

fn setup(seed: u64, horizon: usize, nodes: usize) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = random_env(&mut rng, horizon, nodes);
    let alloc = random_allocation(&mut rng, &env);
    let eta = random_eta(&mut rng, &env);
    Setup { env, alloc, eta, rng }
}

fn options(eta: &[f64], anchors: Option<Vec<f64>>) -> SynthesisOptions {
    SynthesisOptions { anchors, eta: eta.to_vec(), strict_literal: false }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// From three periods on, the continuing potential covers only the best
    /// fixed exit period; see `three_period_synthesis_can_reward_a_misreport`.
    #[test]
    fn synthesized_payments_pass_the_audit(seed in any::<u64>(), horizon in 1usize..=2, nodes in 5usize..=31) {
        let s = setup(seed, horizon, nodes);
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let lattice = synthesize_on(&base, &options(&s.eta, None)).unwrap().lattice(&base).unwrap();
        let solution = solve_value(&lattice, SolverOptions::default()).unwrap();
        let report = one_shot_check(&lattice, &solution, DEFAULT_IC_TOLERANCE);
        prop_assert!(report.verdict && report.bellman_verdict, "worst gap {}", report.worst_gap);
    }

    #[test]
    fn gaps_do_not_depend_on_anchors(seed in any::<u64>(), horizon in 1usize..=3, nodes in 5usize..=31) {
        let mut s = setup(seed, horizon, nodes);
        let anchors: Vec<f64> = s.env.grids().iter().map(|g| s.rng.gen_range(g.lo()..=g.hi())).collect();
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let audit = |anchors: Option<Vec<f64>>| {
            let lattice = synthesize_on(&base, &options(&s.eta, anchors)).unwrap().lattice(&base).unwrap();
            let solution = solve_value(&lattice, SolverOptions::default()).unwrap();
            one_shot_check(&lattice, &solution, DEFAULT_IC_TOLERANCE)
        };
        let (a, b) = (audit(None), audit(Some(anchors)));
        for (x, y) in a.entries().iter().zip(b.entries()) {
            prop_assert!((x.gap - y.gap).abs() <= ANCHOR_TOLERANCE, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn anchors_move_payment_streams_by_constants(seed in any::<u64>(), horizon in 1usize..=3, nodes in 5usize..=31) {
        let mut s = setup(seed, horizon, nodes);
        let anchors: Vec<f64> = s.env.grids().iter().map(|g| s.rng.gen_range(g.lo()..=g.hi())).collect();
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let report = revenue_equivalence(&base, &default_anchors(&s.env), &anchors, &s.eta).unwrap();
        prop_assert!(report.max_state_deviation <= EQUIVALENCE_TOLERANCE, "{report:?}");
        prop_assert_eq!(*report.posted_shift.last().unwrap(), 0.0);
    }

    #[test]
    fn recursion_matches_the_path_sum(seed in any::<u64>(), horizon in 1usize..=3, nodes in 3usize..=31) {
        let s = setup(seed, horizon, nodes);
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let table = envelope_gamma(&base).unwrap();
        let paths = path_sum_gamma(&base).unwrap();
        for t in 1..=horizon {
            for tau in t..=horizon {
                prop_assert!(table.at(t, tau).max_abs_diff(&paths[t - 1][tau - t]) <= PATH_SUM_TOLERANCE);
            }
        }
    }

    #[test]
    fn posted_prices_recover_their_thresholds(seed in any::<u64>(), horizon in 2usize..=3, nodes in 5usize..=31) {
        let s = setup(seed, horizon, nodes);
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let synth = synthesize_on(&base, &options(&s.eta, None)).unwrap();
        let report = regular_set_membership(&base, &synth.potentials, &synth.posted).unwrap();
        prop_assert!(report.member, "{report:?}");
        for t in 1..horizon {
            let grid = s.env.grid(t);
            let cell = grid.point(1) - grid.point(0);
            let found = report.eta[t - 1].unwrap();
            prop_assert!((found - s.eta[t - 1]).abs() <= cell + ROOT_SLACK, "period {t}: {found} vs {}", s.eta[t - 1]);
        }
    }

    #[test]
    fn rebasing_zeroes_the_bottom_value(seed in any::<u64>(), horizon in 1usize..=3, nodes in 5usize..=31) {
        let s = setup(seed, horizon, nodes);
        let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
        let mut synth = synthesize_on(&base, &options(&s.eta, None)).unwrap();
        synth.rebase_bottom_surplus(&base, SolverOptions::default()).unwrap();
        let solution = solve_value(&synth.lattice(&base).unwrap(), SolverOptions::default()).unwrap();
        prop_assert!(solution.period(1).value[(0, 0)].abs() <= BOTTOM_TOLERANCE);
    }
}

/// Gain of reporting node `j` at true node `i` in period 1 and exiting at the
/// fixed period `tau`, over truthful reports with the same exit.
fn fixed_exit_gain(lattice: &Lattice, tau: usize) -> f64 {
    let env = lattice.env();
    let grid = env.grid(1);
    let layer = lattice.layer(1);
    let payoffs = horizon_payoffs(lattice, tau).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let a = layer.allocation[(0, j)];
            let flow = horner(&env.agent().poly(1).slice_at_y(a), grid.point(i)) + layer.continuing[(0, j)];
            let ahead = lattice.weights_at(1, grid.point(i), a, None).dot(payoffs[1].row(lattice.next_context(1, j)));
            worst = worst.max(env.discount() * flow + ahead - payoffs[0][(0, i)]);
        }
    }
    worst
}

/// The potential-length inequalities hold, yet misreporting in period 1 and
/// exiting in period 2 pays: the continuing potential follows the exit in
/// period 3, which is the best fixed exit, and leaves the earlier one unpriced.
#[test]
fn three_period_synthesis_can_reward_a_misreport() {
    let s = setup(10_293_576_678_507_770_555, 3, 41);
    let base = Lattice::for_allocation(&s.env, &s.alloc).unwrap();
    let synth = synthesize_on(&base, &options(&s.eta, None)).unwrap();
    let lattice = synth.lattice(&base).unwrap();
    assert!(verify_sufficiency(&lattice, &synth.potentials).unwrap().passed);
    let solution = solve_value(&lattice, SolverOptions::default()).unwrap();
    let report = one_shot_check(&lattice, &solution, DEFAULT_IC_TOLERANCE);
    assert!(!report.bellman_verdict);
    assert!(report.worst_bellman_gap > 0.01, "{}", report.worst_bellman_gap);
    assert!(fixed_exit_gain(&lattice, 3).abs() <= 1e-12);
    assert!(fixed_exit_gain(&lattice, 2) > 0.01);
}
