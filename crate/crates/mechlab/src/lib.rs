//! Numerical lab for finite-horizon dynamic mechanisms in which the agent
//! privately observes a Markov state each period and may exit at any time.
//!
//! Everything is solved on per-period state grids. The crate is organised
//! bottom-up:
//!
//! - [`envlab`]: grids, transition kernels, utilities, assumption checks, sampling.
//! - [`mechcore`]: allocation and payment rules, reporting strategies, stopping policies.
//! - [`lattice`]: a mechanism lowered onto the grids, shared by the solvers.
//! - [`valsolve`]: optimal stopping by backward induction and the payoff identities.
//! - [`icver`]: one-shot deviation audit and an exhaustive deviation oracle.
//! - [`paysynth`]: envelope derivatives, potentials and payment construction.
//! - [`optmech`]: the principal's relaxed problem over parametric allocations.
//! - [`simcli`]: scenario files, Monte Carlo and the command implementations.

pub mod envlab;
pub mod error;
pub mod icver;
pub mod lattice;
pub mod mechcore;
pub mod optmech;
pub mod paysynth;
pub mod simcli;
pub mod valsolve;

mod par;
#[cfg(test)]
mod testkit;

pub use error::{Error, Result};
