//! Shared fixtures for unit tests: the two-period seller-buyer environment and
//! mechanisms built on it.

use crate::envlab::environment::{EnvironmentSpec, InitialLaw, DEFAULT_LIPSCHITZ_BOUND};
use crate::envlab::{Environment, Monomial, Poly2, TransitionKernel, UtilitySpec};
use crate::lattice::Lattice;
use crate::mechcore::{AllocationRule, Mechanism, NodeTable, PaymentRules, StateFn};

pub fn seller_buyer_spec(nodes: usize) -> EnvironmentSpec {
    EnvironmentSpec {
        horizon: 2,
        discount: 1.0,
        first_bounds: (0.0, 1.0),
        nodes,
        later_bounds: None,
        kernels: vec![TransitionKernel::affine_uniform(0.5, 0.5, 1.0).unwrap()],
        principal: UtilitySpec::new(vec![Poly2::new(vec![Monomial::new(-0.5, 0, 2), Monomial::new(1.0, 1, 0)])]),
        agent: UtilitySpec::new(vec![Poly2::new(vec![Monomial::new(1.0, 0, 1), Monomial::new(1.0, 1, 1)])]),
        initial: InitialLaw::Uniform,
        allocation_ranges: vec![(0.0, 6.0), (0.0, 8.0)],
        lipschitz_bound: DEFAULT_LIPSCHITZ_BOUND,
    }
}

pub fn seller_buyer(nodes: usize) -> Environment {
    seller_buyer_spec(nodes).build().unwrap()
}

pub fn first_allocation() -> Poly2 {
    Poly2::new(vec![Monomial::new(10.0 / 3.0, 1, 0), Monomial::new(4.0 / 3.0, 0, 0)])
}

/// `θ₂ + θ₁/2 + 1/2`, second argument the previous report.
pub fn second_allocation() -> Poly2 {
    Poly2::new(vec![Monomial::new(1.0, 1, 0), Monomial::new(0.5, 0, 1), Monomial::new(0.5, 0, 0)])
}

pub fn optimal_allocation() -> AllocationRule {
    AllocationRule::new(
        vec![StateFn::Poly(first_allocation()), StateFn::Poly(second_allocation())],
        vec![(0.0, 6.0), (0.0, 8.0)],
        vec![false, true],
    )
    .unwrap()
}

/// Closed-form payments of the worked example: terminal payments cancel the
/// allocation, the continuing payment follows the printed first-period display
/// with its expectations taken by the lab's own quadrature, and the posted
/// price is `rho1`.
pub fn displayed_mechanism(env: &Environment, rho1: f64) -> Mechanism {
    let alloc = optimal_allocation();
    let lattice = Lattice::for_allocation(env, &alloc).unwrap();
    let g1 = env.grid(1);
    let g2 = env.grid(2);
    let layer2 = lattice.layer(2);
    let a2 = &layer2.allocation;
    let a2_theta = crate::lattice::Field::new(
        a2.rows().iter().map(|r| r.iter().zip(g2.points()).map(|(a, x)| a * x).collect()).collect(),
    );
    let phi: Vec<f64> = (0..g1.len())
        .map(|i| {
            let theta = g1.point(i);
            let a1 = lattice.layer(1).allocation[(0, i)];
            let mean_a2 = lattice.expect(1, 0, i, a2);
            let mean_a2_theta = lattice.expect(1, 0, i, &a2_theta);
            (a1 + 0.5 * mean_a2) * theta - mean_a2_theta - (1.0 + theta) * a1
        })
        .collect();
    let pay = PaymentRules::new(
        vec![StateFn::Nodes(NodeTable::new(g1.points().to_vec(), phi).unwrap()), StateFn::zero()],
        vec![StateFn::Poly(first_allocation().scaled(-1.0)), StateFn::Poly(second_allocation().scaled(-1.0))],
        vec![rho1, 0.0],
    )
    .unwrap();
    Mechanism::new(alloc, pay).unwrap()
}

/// Three periods, discount 0.9, same kernel and utilities as the seller-buyer case.
pub fn three_period(nodes: usize) -> Environment {
    let mut spec = seller_buyer_spec(nodes);
    spec.horizon = 3;
    spec.discount = 0.9;
    spec.kernels = vec![TransitionKernel::affine_uniform(0.5, 0.5, 1.0).unwrap(); 2];
    spec.allocation_ranges = vec![(0.0, 6.0), (0.0, 8.0), (0.0, 10.0)];
    spec.build().unwrap()
}

/// `α_t = k_t θ + b_t`, no memory.
pub fn affine_markov(slopes: &[f64], intercepts: &[f64], ranges: Vec<(f64, f64)>) -> AllocationRule {
    let periods = slopes
        .iter()
        .zip(intercepts)
        .map(|(&k, &b)| StateFn::Poly(Poly2::new(vec![Monomial::new(k, 1, 0), Monomial::new(b, 0, 0)])))
        .collect();
    AllocationRule::markov(periods, ranges).unwrap()
}
