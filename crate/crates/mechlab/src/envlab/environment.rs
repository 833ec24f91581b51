use serde::Serialize;

use super::grid::{PeriodGrid, Weights};
use super::kernel::TransitionKernel;
use super::utility::UtilitySpec;
use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 201;
pub const DEFAULT_LIPSCHITZ_BOUND: f64 = 1e3;
const ENVELOPE_WIDENING: f64 = 0.01;
const DERIVATIVE_TOLERANCE: f64 = 1e-6;

/// Law of the period-1 state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Uniform,
    /// Density values at `points`, interpolated onto grid 1 and renormalized.
    Tabular { points: Vec<f64>, density: Vec<f64> },
}

/// Everything needed to materialize an [`Environment`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub horizon: usize,
    pub discount: f64,
    pub first_bounds: (f64, f64),
    pub nodes: usize,
    /// Explicit bounds for periods `2..=T`; each must cover the reachable support.
    pub later_bounds: Option<Vec<(f64, f64)>>,
    /// Kernel `t` drives the move from period `t` to `t + 1`.
    pub kernels: Vec<TransitionKernel>,
    pub principal: UtilitySpec,
    pub agent: UtilitySpec,
    pub initial: InitialLaw,
    /// Declared allocation range of each period.
    pub allocation_ranges: Vec<(f64, f64)>,
    pub lipschitz_bound: f64,
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<Environment> {
        build_environment(self)
    }
}

/// Discretized Markov environment. Periods are 1-based throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    horizon: usize,
    discount: f64,
    grids: Vec<PeriodGrid>,
    kernels: Vec<TransitionKernel>,
    principal: UtilitySpec,
    agent: UtilitySpec,
    initial: InitialLaw,
    /// Initial density at the grid-1 nodes, integrating to one.
    initial_density: Vec<f64>,
    allocation_ranges: Vec<(f64, f64)>,
    lipschitz_bound: f64,
}

pub fn build_environment(spec: &EnvironmentSpec) -> Result<Environment> {
    let horizon = spec.horizon;
    if horizon < 1 {
        return Err(Error::Degenerate(format!("horizon must be at least 1, got {horizon}")));
    }
    if !(spec.discount > 0.0 && spec.discount <= 1.0) {
        return Err(Error::Degenerate(format!("discount must lie in (0, 1], got {}", spec.discount)));
    }
    if spec.kernels.len() != horizon - 1 {
        return Err(Error::Schema(format!(
            "{} kernels for horizon {horizon}; expected {}",
            spec.kernels.len(),
            horizon - 1
        )));
    }
    if spec.allocation_ranges.len() != horizon {
        return Err(Error::Schema(format!(
            "{} allocation ranges for horizon {horizon}",
            spec.allocation_ranges.len()
        )));
    }
    for (k, &(lo, hi)) in spec.allocation_ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Schema(format!("allocation range of period {} is [{lo}, {hi}]", k + 1)));
        }
    }
    if let Some(later) = &spec.later_bounds {
        if later.len() != horizon - 1 {
            return Err(Error::Schema(format!(
                "{} later-period bounds for horizon {horizon}",
                later.len()
            )));
        }
    }
    let principal = spec.principal.clone().broadcast(horizon)?;
    let agent = spec.agent.clone().broadcast(horizon)?;

    let mut grids = Vec::with_capacity(horizon);
    grids.push(PeriodGrid::uniform(1, spec.first_bounds.0, spec.first_bounds.1, spec.nodes)?);
    for t in 1..horizon {
        let prev = &grids[t - 1];
        let kernel = &spec.kernels[t - 1];
        let (reach_lo, reach_hi) =
            kernel.support_envelope((prev.lo(), prev.hi()), spec.allocation_ranges[t - 1]);
        let (lo, hi) = match &spec.later_bounds {
            Some(later) => {
                let (lo, hi) = later[t - 1];
                if lo > reach_lo + 1e-12 || hi < reach_hi - 1e-12 {
                    return Err(Error::Support(format!(
                        "period {} bounds [{lo}, {hi}] do not cover the reachable support [{reach_lo}, {reach_hi}]",
                        t + 1
                    )));
                }
                (lo, hi)
            }
            None => match kernel {
                TransitionKernel::AffineUniform(_) => {
                    let pad = ENVELOPE_WIDENING * (reach_hi - reach_lo);
                    (reach_lo - pad, reach_hi + pad)
                }
                TransitionKernel::Tabular(_) => (reach_lo, reach_hi),
            },
        };
        grids.push(PeriodGrid::uniform(t + 1, lo, hi, spec.nodes)?);
    }

    let first = &grids[0];
    let raw: Vec<f64> = match &spec.initial {
        InitialLaw::Uniform => vec![1.0; first.len()],
        InitialLaw::Tabular { points, density } => {
            if points.len() != density.len() || points.len() < 2 {
                return Err(Error::Schema("initial density needs matching points and values".into()));
            }
            if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(Error::Schema("initial density must be finite and nonnegative".into()));
            }
            first
                .points()
                .iter()
                .map(|&x| super::kernel::interp(points, density, x))
                .collect()
        }
    };
    let mass: f64 = first.trapezoid_weights().iter().zip(&raw).map(|(w, d)| w * d).sum();
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::Degenerate("initial density has no mass".into()));
    }
    let initial_density = raw.iter().map(|d| d / mass).collect();

    let env = Environment {
        horizon,
        discount: spec.discount,
        grids,
        kernels: spec.kernels.clone(),
        principal,
        agent,
        initial: spec.initial.clone(),
        initial_density,
        allocation_ranges: spec.allocation_ranges.clone(),
        lipschitz_bound: spec.lipschitz_bound,
    };
    env.check_utilities()?;
    Ok(env)
}

impl Environment {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// `δ^t`.
    pub fn discount_pow(&self, t: usize) -> f64 {
        self.discount.powi(t as i32)
    }

    pub fn grid(&self, t: usize) -> &PeriodGrid {
        &self.grids[t - 1]
    }

    pub fn grids(&self) -> &[PeriodGrid] {
        &self.grids
    }

    /// Kernel of the move from period `t` to `t + 1`.
    pub fn kernel(&self, t: usize) -> &TransitionKernel {
        &self.kernels[t - 1]
    }

    pub fn kernels(&self) -> &[TransitionKernel] {
        &self.kernels
    }

    pub fn principal(&self) -> &UtilitySpec {
        &self.principal
    }

    pub fn agent(&self) -> &UtilitySpec {
        &self.agent
    }

    pub fn allocation_range(&self, t: usize) -> (f64, f64) {
        self.allocation_ranges[t - 1]
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn initial_law(&self) -> &InitialLaw {
        &self.initial
    }

    /// Initial density at the grid-1 nodes.
    pub fn initial_density(&self) -> &[f64] {
        &self.initial_density
    }

    /// Replaces the agent's utility, keeping everything else.
    pub fn with_agent(&self, agent: UtilitySpec) -> Result<Self> {
        let mut env = self.clone();
        env.agent = agent.broadcast(self.horizon)?;
        env.check_utilities()?;
        Ok(env)
    }

    pub fn with_principal(&self, principal: UtilitySpec) -> Result<Self> {
        let mut env = self.clone();
        env.principal = principal.broadcast(self.horizon)?;
        env.check_utilities()?;
        Ok(env)
    }

    /// Weights for `E^{F_1}[g]`, optionally restricted to states above `cut`.
    pub fn initial_weights(&self, cut: Option<f64>) -> Weights {
        let g = self.grid(1);
        let dens = |j: usize| self.initial_density[j];
        let full = g.segment_weights(g.lo(), g.hi()).weighted_by(dens);
        let mass = full.total();
        match cut {
            None => full.divided_by(mass),
            Some(c) => g.segment_weights(c.max(g.lo()), g.hi()).weighted_by(dens).divided_by(mass),
        }
    }

    /// `F_1(x)`.
    pub fn initial_cdf(&self, x: f64) -> f64 {
        let g = self.grid(1);
        if x <= g.lo() {
            return 0.0;
        }
        if x >= g.hi() {
            return 1.0;
        }
        match self.initial {
            InitialLaw::Uniform => (x - g.lo()) / (g.hi() - g.lo()),
            InitialLaw::Tabular { .. } => g.integral_to(&self.initial_density, x).clamp(0.0, 1.0),
        }
    }

    /// `f_1(x)`.
    pub fn initial_pdf(&self, x: f64) -> f64 {
        let g = self.grid(1);
        if x < g.lo() || x > g.hi() {
            return 0.0;
        }
        g.interpolate(&self.initial_density, x)
    }

    /// `F_{t+1}(x | θ_t, a_t)`.
    pub fn kernel_cdf(&self, t: usize, x: f64, theta_prev: f64, a_prev: f64) -> Result<f64> {
        if t < 1 || t >= self.horizon {
            return Err(Error::Index(format!(
                "no transition out of period {t} with horizon {}",
                self.horizon
            )));
        }
        Ok(self.kernel(t).cdf(x, theta_prev, a_prev))
    }

    /// Explicit derivatives must match central differences; values must be finite.
    fn check_utilities(&self) -> Result<()> {
        for (who, u) in [("principal", &self.principal), ("agent", &self.agent)] {
            for t in 1..=self.horizon {
                let (a_lo, a_hi) = self.allocation_range(t);
                let allocations = [a_lo, 0.5 * (a_lo + a_hi), a_hi];
                let grid = self.grid(t);
                for &x in grid.points() {
                    for &a in &allocations {
                        let v = u.value(t, x, a);
                        if !v.is_finite() {
                            return Err(Error::Schema(format!(
                                "{who} utility of period {t} is not finite at ({x}, {a})"
                            )));
                        }
                        if u.has_explicit_derivatives() {
                            let h = 1e-5 * (1.0 + x.abs());
                            let fd = (u.value(t, x + h, a) - u.value(t, x - h, a)) / (2.0 * h);
                            let d = u.state_derivative(t, x, a);
                            if (fd - d).abs() > DERIVATIVE_TOLERANCE * (1.0 + d.abs()) {
                                return Err(Error::Schema(format!(
                                    "{who} derivative of period {t} is {d} at ({x}, {a}) but differences give {fd}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
