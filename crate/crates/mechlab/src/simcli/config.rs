use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::num::{pair, values, Num};
use crate::envlab::environment::{EnvironmentSpec, InitialLaw, DEFAULT_LIPSCHITZ_BOUND, DEFAULT_NODES};
use crate::envlab::{Environment, Monomial, Poly2, TabularKernel, TransitionKernel, UtilitySpec};
use crate::error::{Error, Result};
use crate::icver::DEFAULT_IC_TOLERANCE;
use crate::mechcore::{AllocationRule, ContextTable, NodeTable, PaymentRules, StateFn};
use crate::optmech::{AllocationFamily, OptimizerConfig};
use crate::paysynth::SynthesisOptions;
use crate::valsolve::SolverOptions;

/// Polynomial terms `[coefficient, power of the first variable, power of the second]`.
pub type PolyBlock = Vec<(Num, u32, u32)>;

fn poly(block: &PolyBlock) -> Poly2 {
    Poly2::new(block.iter().map(|&(c, x, y)| Monomial::new(c.0, x, y)).collect())
}

/// A scenario file: environment, optional mechanism, synthesis, solver,
/// simulation and output blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub environment: EnvironmentBlock,
    #[serde(default)]
    pub mechanism: Option<MechanismBlock>,
    #[serde(default)]
    pub synthesis: SynthesisBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub horizon: usize,
    pub discount: Num,
    pub first_bounds: [Num; 2],
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub later_bounds: Option<Vec<[Num; 2]>>,
    /// Kernel `t` moves the state from period `t` to `t + 1`.
    #[serde(default)]
    pub kernels: Vec<KernelBlock>,
    pub principal: UtilityBlock,
    pub agent: UtilityBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    pub allocation_ranges: Vec<[Num; 2]>,
    #[serde(default)]
    pub lipschitz_bound: Option<Num>,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelBlock {
    /// Next state `state·θ + allocation·a + U[0, width]`.
    AffineUniform { state: Num, allocation: Num, width: Num },
    /// Density rows indexed `[state node][allocation node][next node]`.
    Tabular {
        state_nodes: Vec<Num>,
        alloc_nodes: Vec<Num>,
        next_nodes: Vec<Num>,
        rows: Vec<Vec<Vec<Num>>>,
        #[serde(default)]
        finite_difference: bool,
    },
}

impl KernelBlock {
    fn build(&self) -> Result<TransitionKernel> {
        match self {
            Self::AffineUniform { state, allocation, width } => {
                TransitionKernel::affine_uniform(state.0, allocation.0, width.0)
            }
            Self::Tabular { state_nodes, alloc_nodes, next_nodes, rows, finite_difference } => {
                let rows = rows.iter().map(|by_alloc| by_alloc.iter().map(|r| values(r)).collect()).collect();
                TabularKernel::new(values(state_nodes), values(alloc_nodes), values(next_nodes), rows, *finite_difference)
                    .map(TransitionKernel::Tabular)
            }
        }
    }
}

/// Utility polynomials in (state, allocation): one for every period or one per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityBlock {
    pub periods: Vec<PolyBlock>,
    /// Closed-form state derivatives; differentiated symbolically when absent.
    #[serde(default)]
    pub derivatives: Option<Vec<PolyBlock>>,
    /// Declares the utility non-decreasing in the state.
    #[serde(default)]
    pub monotone: bool,
}

impl UtilityBlock {
    fn build(&self) -> Result<UtilitySpec> {
        let spec = UtilitySpec::new(self.periods.iter().map(poly).collect());
        let spec = match &self.derivatives {
            Some(d) => spec.with_derivatives(d.iter().map(poly).collect())?,
            None => spec,
        };
        Ok(spec.monotone(self.monotone))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBlock {
    #[default]
    Uniform,
    Tabular { points: Vec<Num>, density: Vec<Num> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismBlock {
    pub allocation: AllocationBlock,
    /// Payments synthesized from the allocation when absent.
    #[serde(default)]
    pub payments: Option<PaymentsBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationBlock {
    /// Per-period opt-in to the previous report; all off when absent.
    #[serde(default)]
    pub memory: Option<Vec<bool>>,
    pub periods: Vec<RuleBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentsBlock {
    pub continuing: Vec<RuleBlock>,
    pub terminal: Vec<RuleBlock>,
    pub posted: Vec<Num>,
}

/// Rule of (current report, previous report).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleBlock {
    Poly { terms: PolyBlock },
    Nodes { points: Vec<Num>, values: Vec<Num> },
    Contexts { prev_points: Vec<Num>, points: Vec<Num>, rows: Vec<Vec<Num>> },
}

impl RuleBlock {
    fn build(&self) -> Result<StateFn> {
        match self {
            Self::Poly { terms } => Ok(StateFn::Poly(poly(terms))),
            Self::Nodes { points, values: v } => NodeTable::new(values(points), values(v)).map(StateFn::Nodes),
            Self::Contexts { prev_points, points, rows } => {
                ContextTable::new(values(prev_points), values(points), rows.iter().map(|r| values(r)).collect())
                    .map(StateFn::Contexts)
            }
        }
    }
}

fn rules(blocks: &[RuleBlock]) -> Result<Vec<StateFn>> {
    blocks.iter().map(RuleBlock::build).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisBlock {
    /// Integration anchors per period; grid bottoms when absent.
    #[serde(default)]
    pub anchors: Option<Vec<Num>>,
    /// Exit thresholds for periods `1..T`.
    #[serde(default)]
    pub eta: Vec<Num>,
    /// Shift first-period payments so the bottom first-period state has zero value.
    #[serde(default)]
    pub rebase_bottom: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub strict_literal: bool,
    pub require_single_crossing: bool,
    pub ic_tolerance: Num,
    pub optimizer: OptimizerBlock,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            strict_literal: false,
            require_single_crossing: false,
            ic_tolerance: Num(DEFAULT_IC_TOLERANCE),
            optimizer: OptimizerBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerBlock {
    /// Affine with the mechanism's memory flags when absent.
    pub family: Option<AllocationFamily>,
    pub config: OptimizerConfig,
    /// Threshold vectors to sweep; the synthesis thresholds when absent.
    pub eta_sweep: Option<Vec<Vec<Num>>>,
    /// Known optimum to compare against, in family parameter order.
    pub reference: Option<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self { paths: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub format: Format,
    /// Record elapsed time in the run report; off keeps reports byte-identical.
    pub wall_time: bool,
}

/// Scenarios shipped with the crate, by file name.
pub const BUNDLED: [(&str, &str); 2] = [
    ("seller_buyer_T2.json", include_str!("../../scenarios/seller_buyer_T2.json")),
    ("broken_support.json", include_str!("../../scenarios/broken_support.json")),
];

impl ScenarioConfig {
    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| Self::from_json(text).expect("bundled scenarios parse"))
    }

    /// Reads `path`; a bare file name that does not exist falls back to the bundled scenario of that name.
    pub fn locate(path: &Path) -> Result<Self> {
        if !path.exists() && path.parent().map_or(true, |p| p.as_os_str().is_empty()) {
            if let Some(cfg) = path.to_str().and_then(Self::bundled) {
                return Ok(cfg);
            }
        }
        Self::load(path)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form: parsed numbers, sorted keys.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn environment_spec(&self) -> Result<EnvironmentSpec> {
        let e = &self.environment;
        let initial = match &e.initial {
            InitialBlock::Uniform => InitialLaw::Uniform,
            InitialBlock::Tabular { points, density } => {
                InitialLaw::Tabular { points: values(points), density: values(density) }
            }
        };
        Ok(EnvironmentSpec {
            horizon: e.horizon,
            discount: e.discount.0,
            first_bounds: pair(e.first_bounds),
            nodes: e.nodes,
            later_bounds: e.later_bounds.as_ref().map(|b| b.iter().copied().map(pair).collect()),
            kernels: e.kernels.iter().map(KernelBlock::build).collect::<Result<_>>()?,
            principal: e.principal.build()?,
            agent: e.agent.build()?,
            initial,
            allocation_ranges: e.allocation_ranges.iter().copied().map(pair).collect(),
            lipschitz_bound: e.lipschitz_bound.map_or(DEFAULT_LIPSCHITZ_BOUND, f64::from),
        })
    }

    pub fn environment(&self) -> Result<Environment> {
        self.environment_spec()?.build()
    }

    fn memory_flags(&self) -> Vec<bool> {
        let horizon = self.environment.horizon;
        self.mechanism
            .as_ref()
            .and_then(|m| m.allocation.memory.clone())
            .unwrap_or_else(|| vec![false; horizon])
    }

    pub fn allocation(&self, env: &Environment) -> Result<AllocationRule> {
        let block = self
            .mechanism
            .as_ref()
            .ok_or_else(|| Error::Schema("scenario has no mechanism block".into()))?;
        let ranges = (1..=env.horizon()).map(|t| env.allocation_range(t)).collect();
        AllocationRule::new(rules(&block.allocation.periods)?, ranges, self.memory_flags())
    }

    /// Explicit payments, when the scenario gives them.
    pub fn payments(&self) -> Result<Option<PaymentRules>> {
        match self.mechanism.as_ref().and_then(|m| m.payments.as_ref()) {
            Some(p) => PaymentRules::new(rules(&p.continuing)?, rules(&p.terminal)?, values(&p.posted)).map(Some),
            None => Ok(None),
        }
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            anchors: self.synthesis.anchors.as_ref().map(|a| values(a)),
            eta: values(&self.synthesis.eta),
            strict_literal: self.solver.strict_literal,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            strict_literal: self.solver.strict_literal,
            require_single_crossing: self.solver.require_single_crossing,
        }
    }

    pub fn optimizer_family(&self) -> AllocationFamily {
        self.solver
            .optimizer
            .family
            .clone()
            .unwrap_or_else(|| AllocationFamily::Affine { memory: self.memory_flags() })
    }

    /// Threshold vectors the optimizer runs at.
    pub fn optimizer_etas(&self) -> Vec<Vec<f64>> {
        match &self.solver.optimizer.eta_sweep {
            Some(sweep) => sweep.iter().map(|e| values(e)).collect(),
            None => vec![values(&self.synthesis.eta)],
        }
    }
}
