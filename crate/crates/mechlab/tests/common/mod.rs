//! Random small instances built from the public API: affine uniform kernels
//! that shift up with the state and the allocation, allocations increasing in
//! the report, and agent utilities increasing in the state.

#![allow(dead_code)]

use mechlab::envlab::environment::DEFAULT_LIPSCHITZ_BOUND;
use mechlab::envlab::{Environment, EnvironmentSpec, InitialLaw, Monomial, Poly2, TransitionKernel, UtilitySpec};
use mechlab::lattice::Lattice;
use mechlab::mechcore::{AllocationRule, ContextTable, Mechanism, NodeTable, PaymentRules, StateFn};
use mechlab::paysynth::{synthesize_on, SynthesisOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the payments of a random instance are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payments {
    /// Synthesized from the allocation with random thresholds.
    Synthesized,
    /// Synthesized, then every table entry jittered.
    Jittered,
    /// Independent random tables.
    Random,
}

pub struct Instance {
    pub env: Environment,
    pub alloc: AllocationRule,
    pub mech: Mechanism,
    /// Thresholds the payments were synthesized for; empty for random tables.
    pub eta: Vec<f64>,
}

/// Allocation ceiling per period. Coefficients are below one, so states stay
/// below 1, 3.5 and 8 and allocations never reach the ceiling.
fn allocation_cap(t: usize) -> f64 {
    [2.0, 6.0, 13.0][t - 1]
}

pub fn poly(terms: &[(f64, u32, u32)]) -> Poly2 {
    Poly2::new(terms.iter().map(|&(c, x, y)| Monomial::new(c, x, y)).collect())
}

pub fn random_env(rng: &mut ChaCha8Rng, horizon: usize, nodes: usize) -> Environment {
    let kernels = (1..horizon)
        .map(|_| {
            TransitionKernel::affine_uniform(rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5), rng.gen_range(0.5..1.5))
                .unwrap()
        })
        .collect();
    let agent = (0..horizon)
        .map(|_| poly(&[(rng.gen_range(0.0..1.0), 0, 1), (rng.gen_range(0.0..1.0), 1, 1), (rng.gen_range(0.0..1.0), 1, 0)]))
        .collect();
    let principal = (0..horizon).map(|_| poly(&[(-0.5, 0, 2), (1.0, 1, 1)])).collect();
    EnvironmentSpec {
        horizon,
        discount: rng.gen_range(0.7..=1.0),
        first_bounds: (0.0, 1.0),
        nodes,
        later_bounds: None,
        kernels,
        principal: UtilitySpec::new(principal),
        agent: UtilitySpec::new(agent).monotone(true),
        initial: InitialLaw::Uniform,
        allocation_ranges: (1..=horizon).map(|t| (0.0, allocation_cap(t))).collect(),
        lipschitz_bound: DEFAULT_LIPSCHITZ_BOUND,
    }
    .build()
    .unwrap()
}

/// Affine in the report, optionally also in the previous report in the final
/// period. Earlier memory periods admit no single posted price, so synthesis
/// would reject them.
pub fn random_allocation(rng: &mut ChaCha8Rng, env: &Environment) -> AllocationRule {
    let horizon = env.horizon();
    let memory: Vec<bool> = (1..=horizon).map(|t| t > 1 && t == horizon && rng.gen_bool(0.5)).collect();
    let periods = memory
        .iter()
        .map(|&m| {
            let mut terms = vec![(rng.gen_range(0.0..1.0), 1, 0), (rng.gen_range(0.0..1.0), 0, 0)];
            if m {
                terms.push((rng.gen_range(0.0..1.0), 0, 1));
            }
            StateFn::Poly(poly(&terms))
        })
        .collect();
    AllocationRule::new(periods, (1..=horizon).map(|t| env.allocation_range(t)).collect(), memory).unwrap()
}

/// Thresholds strictly inside each non-final grid.
pub fn random_eta(rng: &mut ChaCha8Rng, env: &Environment) -> Vec<f64> {
    (1..env.horizon()).map(|t| rng.gen_range(env.grid(t).lo()..env.grid(t).hi())).collect()
}

fn table(env: &Environment, alloc: &AllocationRule, t: usize, mut value: impl FnMut(usize, usize) -> f64) -> StateFn {
    let points = env.grid(t).points().to_vec();
    if alloc.has_memory(t) {
        let prev = env.grid(t - 1).points().to_vec();
        let rows = (0..prev.len()).map(|c| (0..points.len()).map(|i| value(c, i)).collect()).collect();
        StateFn::Contexts(ContextTable::new(prev, points, rows).unwrap())
    } else {
        let row = (0..points.len()).map(|i| value(0, i)).collect();
        StateFn::Nodes(NodeTable::new(points, row).unwrap())
    }
}

/// Payment kind for the `k`-th instance of a battery, cycling through all three.
pub fn cycled(k: usize) -> Payments {
    [Payments::Synthesized, Payments::Jittered, Payments::Random][k % 3]
}

/// Instance from a bare seed, for property strategies.
pub fn seeded_instance(seed: u64, horizon: usize, nodes: usize, payments: Payments) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), horizon, nodes, payments)
}

pub fn random_instance(rng: &mut ChaCha8Rng, horizon: usize, nodes: usize, payments: Payments) -> Instance {
    let env = random_env(rng, horizon, nodes);
    let alloc = random_allocation(rng, &env);
    let (mech, eta) = match payments {
        Payments::Random => {
            let continuing = (1..=horizon).map(|t| table(&env, &alloc, t, |_, _| rng.gen_range(-2.0..1.0))).collect();
            let terminal = (1..=horizon).map(|t| table(&env, &alloc, t, |_, _| rng.gen_range(-3.0..0.0))).collect();
            let mut posted: Vec<f64> = (0..horizon).map(|_| rng.gen_range(-0.5..0.5)).collect();
            posted[horizon - 1] = 0.0;
            let pay = PaymentRules::new(continuing, terminal, posted).unwrap();
            (Mechanism::new(alloc.clone(), pay).unwrap(), Vec::new())
        }
        Payments::Synthesized | Payments::Jittered => {
            let eta = random_eta(rng, &env);
            let base = Lattice::for_allocation(&env, &alloc).unwrap();
            let opts = SynthesisOptions { anchors: None, eta: eta.clone(), strict_literal: false };
            let synth = synthesize_on(&base, &opts).unwrap();
            let mut mech = synth.mechanism(&env, &alloc).unwrap();
            if payments == Payments::Jittered {
                let pay = &synth.payments;
                let continuing = (1..=horizon)
                    .map(|t| table(&env, &alloc, t, |c, i| pay.continuing[t - 1][(c, i)] + rng.gen_range(-0.3..0.3)))
                    .collect();
                let terminal = (1..=horizon)
                    .map(|t| table(&env, &alloc, t, |c, i| pay.terminal[t - 1][(c, i)] + rng.gen_range(-0.3..0.3)))
                    .collect();
                let jittered = PaymentRules::new(continuing, terminal, synth.posted.clone()).unwrap();
                mech = mech.with_payments(jittered).unwrap();
            }
            (mech, eta)
        }
    };
    Instance { env, alloc, mech, eta }
}
