//! Mechanisms and the agent's side of the game: allocation and payment rules,
//! reporting strategies and stopping policies.

pub mod rules;
pub mod statefn;
pub mod strategy;

pub use rules::{AllocationRule, Mechanism, Outcome, PaymentRules};
pub use statefn::{ContextTable, NodeTable, StateFn};
pub use strategy::{ReportMap, ReportingStrategy, StoppingPolicy};
