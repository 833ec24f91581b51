use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::environment::{Environment, InitialLaw};
use crate::error::Result;
use crate::mechcore::{Mechanism, ReportingStrategy, StoppingPolicy};

/// One realized path up to and including the stopping period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub reports: Vec<f64>,
    pub allocations: Vec<f64>,
    /// Continuing payment in every period before the stop, terminal payment at the stop.
    pub transfers: Vec<f64>,
    pub stop_time: usize,
    pub posted: f64,
    pub agent_payoff: f64,
    pub principal_payoff: f64,
}

/// Independent stream `index` of the generator seeded by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_initial(env: &Environment, u: f64) -> f64 {
    let g = env.grid(1);
    match env.initial_law() {
        InitialLaw::Uniform => g.lo() + u * (g.hi() - g.lo()),
        InitialLaw::Tabular { .. } => {
            let (mut lo, mut hi) = (g.lo(), g.hi());
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if env.initial_cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// Draws one path with the supplied generator.
pub fn sample_path(
    env: &Environment,
    mech: &Mechanism,
    strategy: &ReportingStrategy,
    stop: &StoppingPolicy,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let horizon = env.horizon();
    let mut path = Trajectory {
        states: Vec::with_capacity(horizon),
        reports: Vec::with_capacity(horizon),
        allocations: Vec::with_capacity(horizon),
        transfers: Vec::with_capacity(horizon),
        stop_time: horizon,
        posted: 0.0,
        agent_payoff: 0.0,
        principal_payoff: 0.0,
    };
    let mut theta = draw_initial(env, rng.gen::<f64>());
    let mut prev_report = None;
    for t in 1..=horizon {
        let grid = env.grid(t);
        let report = strategy.report(t, theta, grid);
        let memory = if mech.allocation().has_memory(t) { prev_report } else { None };
        let out = mech.eval(t, report, memory)?;
        let a = out.allocation;
        let weight = env.discount_pow(t);
        let u1 = env.agent().value(t, theta, a);
        let u0 = env.principal().value(t, theta, a);
        path.states.push(theta);
        path.reports.push(report);
        path.allocations.push(a);
        if stop.stops(t, theta, grid, horizon) {
            let rho = mech.payments().posted(t);
            path.transfers.push(out.terminal);
            path.stop_time = t;
            path.posted = rho;
            path.agent_payoff += weight * (u1 + out.terminal) + rho;
            path.principal_payoff += weight * (u0 - out.terminal) - rho;
            break;
        }
        path.transfers.push(out.continuing);
        path.agent_payoff += weight * (u1 + out.continuing);
        path.principal_payoff += weight * (u0 - out.continuing);
        theta = env.kernel(t).sample(theta, a, rng.gen::<f64>());
        prev_report = Some(report);
    }
    Ok(path)
}

/// Path driven by stream 0 of `seed`; identical inputs give identical paths.
pub fn sample_trajectory(
    env: &Environment,
    mech: &Mechanism,
    strategy: &ReportingStrategy,
    stop: &StoppingPolicy,
    seed: u64,
) -> Result<Trajectory> {
    sample_path(env, mech, strategy, stop, &mut path_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envlab::environment::{EnvironmentSpec, DEFAULT_LIPSCHITZ_BOUND};
    use crate::envlab::kernel::TransitionKernel;
    use crate::envlab::utility::{Monomial, Poly2, UtilitySpec};
    use crate::mechcore::{AllocationRule, PaymentRules, StateFn};

    fn env() -> Environment {
        EnvironmentSpec {
            horizon: 2,
            discount: 0.9,
            first_bounds: (0.0, 1.0),
            nodes: 21,
            later_bounds: None,
            kernels: vec![TransitionKernel::affine_uniform(0.5, 0.5, 1.0).unwrap()],
            principal: UtilitySpec::new(vec![Poly2::new(vec![Monomial::new(1.0, 1, 0)])]),
            agent: UtilitySpec::new(vec![Poly2::new(vec![Monomial::new(1.0, 0, 1), Monomial::new(1.0, 1, 1)])]),
            initial: InitialLaw::Uniform,
            allocation_ranges: vec![(0.0, 6.0), (0.0, 8.0)],
            lipschitz_bound: DEFAULT_LIPSCHITZ_BOUND,
        }
        .build()
        .unwrap()
    }

    fn mech() -> Mechanism {
        let a1 = Poly2::new(vec![Monomial::new(10.0 / 3.0, 1, 0), Monomial::new(4.0 / 3.0, 0, 0)]);
        let a2 = Poly2::new(vec![Monomial::new(1.0, 1, 0), Monomial::new(0.5, 0, 1), Monomial::new(0.5, 0, 0)]);
        let alloc = AllocationRule::new(
            vec![StateFn::Poly(a1.clone()), StateFn::Poly(a2.clone())],
            vec![(0.0, 6.0), (0.0, 8.0)],
            vec![false, true],
        )
        .unwrap();
        let pay = PaymentRules::new(
            vec![StateFn::constant(-0.2), StateFn::zero()],
            vec![StateFn::Poly(a1.scaled(-1.0)), StateFn::Poly(a2.scaled(-1.0))],
            vec![0.4, 0.0],
        )
        .unwrap();
        Mechanism::new(alloc, pay).unwrap()
    }

    #[test]
    fn stopping_at_one_follows_the_single_period_ledger() {
        let env = env();
        let m = mech();
        let stop = StoppingPolicy::always_stop(2, env.grid(2).hi());
        let p = sample_trajectory(&env, &m, &ReportingStrategy::truthful(), &stop, 7).unwrap();
        assert_eq!(p.stop_time, 1);
        let theta = p.states[0];
        let a = 10.0 / 3.0 * theta + 4.0 / 3.0;
        let expected = 0.9 * ((1.0 + theta) * a - a) + 0.4;
        assert!((p.agent_payoff - expected).abs() < 1e-12);
    }

    #[test]
    fn terminal_flow_at_the_last_period_is_state_times_allocation() {
        let env = env();
        let m = mech();
        let stop = StoppingPolicy::threshold(&[f64::NEG_INFINITY], env.grid(2).hi());
        for seed in 0..20 {
            let p = sample_trajectory(&env, &m, &ReportingStrategy::truthful(), &stop, seed).unwrap();
            assert_eq!(p.stop_time, 2);
            let (t1, t2) = (p.states[0], p.states[1]);
            let a1 = p.allocations[0];
            let a2 = t2 + 0.5 * t1 + 0.5;
            let expected = 0.9 * ((1.0 + t1) * a1 - 0.2) + 0.81 * t2 * a2;
            assert!((p.agent_payoff - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_give_identical_paths_and_seeds_differ() {
        let env = env();
        let m = mech();
        let stop = StoppingPolicy::threshold(&[0.3], env.grid(2).hi());
        let s = ReportingStrategy::truthful();
        let a = sample_trajectory(&env, &m, &s, &stop, 11).unwrap();
        let b = sample_trajectory(&env, &m, &s, &stop, 11).unwrap();
        let c = sample_trajectory(&env, &m, &s, &stop, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
        for p in [a, c] {
            for (t, x) in p.states.iter().enumerate() {
                let g = env.grid(t + 1);
                assert!(*x >= g.lo() && *x <= g.hi());
            }
        }
    }
}
