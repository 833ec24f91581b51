use serde::Serialize;

use super::family::AllocationFamily;
use crate::envlab::Environment;
use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice, Measure};

/// Total surplus minus information rent, split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveParts {
    pub surplus: f64,
    pub rent: f64,
    pub value: f64,
}

/// The principal's relaxed objective for one family and exit thresholds.
/// Evaluation is a pure function of the parameters.
#[derive(Debug, Clone)]
pub struct RelaxedObjective<'e> {
    env: &'e Environment,
    family: AllocationFamily,
    eta: Vec<f64>,
    /// `(1 - F₁) / f₁` at the first-period nodes.
    hazard: Vec<f64>,
}

impl<'e> RelaxedObjective<'e> {
    /// `eta` covers at least the first `T-1` periods and lies on the grids.
    pub fn new(env: &'e Environment, family: AllocationFamily, eta: &[f64]) -> Result<Self> {
        let horizon = env.horizon();
        family.validate(horizon)?;
        if eta.len() + 1 < horizon {
            return Err(Error::Schema(format!("{} thresholds for {horizon} periods", eta.len())));
        }
        for (t, &cut) in eta.iter().enumerate().take(horizon - 1) {
            let grid = env.grid(t + 1);
            if !(grid.lo()..=grid.hi()).contains(&cut) {
                return Err(Error::Index(format!("threshold {cut} outside grid {} [{}, {}]", t + 1, grid.lo(), grid.hi())));
            }
        }
        let hazard = env
            .grid(1)
            .points()
            .iter()
            .map(|&x| {
                let (tail, density) = (1.0 - env.initial_cdf(x), env.initial_pdf(x));
                if density > 0.0 {
                    Ok(tail / density)
                } else if tail <= f64::EPSILON {
                    Ok(0.0)
                } else {
                    Err(Error::Degenerate(format!("initial density vanishes at {x} with mass above it")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { env, family, eta: eta[..horizon - 1].to_vec(), hazard })
    }

    pub fn family(&self) -> &AllocationFamily {
        &self.family
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension(self.env.horizon())
    }

    /// Surplus accrues on unstopped mass under the kernel; the rent propagates
    /// the hazard-weighted state derivative of the agent utility through the
    /// impulse responses.
    pub fn parts(&self, params: &[f64]) -> Result<ObjectiveParts> {
        let rule = self.family.rule(self.env, params)?;
        let lattice = Lattice::for_allocation(self.env, &rule)?;
        let discounted = |f: &dyn Fn(usize) -> Field| -> Vec<Field> {
            (1..=lattice.horizon()).map(|t| f(t).map(|v| self.env.discount_pow(t) * v)).collect()
        };
        let surplus_flows = discounted(&|t| {
            let layer = lattice.layer(t);
            layer.principal_flow.zip_map(&layer.agent_flow, |p, a| p + a)
        });
        let rent_flows = discounted(&|t| lattice.layer(t).agent_slope.clone());
        let surplus = lattice.survival_sum(&surplus_flows, &self.eta, Measure::Kernel, None)?;
        let rent = lattice.survival_sum(&rent_flows, &self.eta, Measure::Impulse, Some(&self.hazard))?;
        let value = surplus - rent;
        if !value.is_finite() {
            return Err(Error::NonFinite(params.to_vec()));
        }
        Ok(ObjectiveParts { surplus, rent, value })
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        self.parts(params).map(|p| p.value)
    }

    /// Central finite-difference gradient with step `step`.
    pub fn gradient(&self, params: &[f64], step: f64) -> Result<Vec<f64>> {
        central_gradient(params, step, |x| self.value(x))
    }
}

pub(crate) fn central_gradient(x: &[f64], step: f64, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + step;
            let up = f(&probe)?;
            probe[k] = x[k] - step;
            let down = f(&probe)?;
            probe[k] = x[k];
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// [`RelaxedObjective::value`] for a single parameter vector.
pub fn relaxed_objective(env: &Environment, family: &AllocationFamily, params: &[f64], eta: &[f64]) -> Result<f64> {
    RelaxedObjective::new(env, family.clone(), eta)?.value(params)
}
