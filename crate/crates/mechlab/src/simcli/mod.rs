//! Scenario files, Monte Carlo statistics and the command implementations
//! behind the `mechlab` binary.
//!
//! Every output is a pure function of the scenario (after command-line
//! overrides) and its seed; wall time is recorded only on request.

mod commands;
mod config;
mod montecarlo;
mod num;
mod output;

pub use commands::{error_code, parse_eta_list, run, Command, Overrides, RunOutcome, Status};
pub use config::{
    AllocationBlock, EnvironmentBlock, Format, InitialBlock, KernelBlock, MechanismBlock, OptimizerBlock,
    OutputBlock, PaymentsBlock, PolyBlock, RuleBlock, ScenarioConfig, SimulationBlock, BUNDLED, SolverBlock,
    SynthesisBlock, UtilityBlock,
};
pub use montecarlo::{monte_carlo, McStats, Moment};
pub use num::Num;
pub use output::{Cell, Table};
