use serde::{Deserialize, Serialize};

use crate::envlab::{Environment, Monomial, Poly2};
use crate::error::{Error, Result};
use crate::mechcore::{AllocationRule, NodeTable, StateFn};

/// Largest parameter count the optimizer accepts.
pub const MAX_DIMENSION: usize = 16;

/// Parametric allocation rules searched by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AllocationFamily {
    /// Per period: slope on the current state, slope on the previous state
    /// (memory periods only), intercept.
    Affine { memory: Vec<bool> },
    /// Per period: values at `knots` evenly spaced states, linear in between.
    Tabular { knots: usize },
}

impl AllocationFamily {
    pub fn affine_markov(horizon: usize) -> Self {
        Self::Affine { memory: vec![false; horizon] }
    }

    /// Checks the family against a horizon and the dimension cap.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            Self::Affine { memory } => {
                if memory.len() != horizon {
                    return Err(Error::Schema(format!("{} memory flags for {horizon} periods", memory.len())));
                }
                if memory.first() == Some(&true) {
                    return Err(Error::Memory("period 1 has no previous report".into()));
                }
            }
            Self::Tabular { knots } if *knots < 2 => {
                return Err(Error::Schema(format!("tabular family needs at least 2 knots, got {knots}")));
            }
            Self::Tabular { .. } => {}
        }
        let dim = self.dimension(horizon);
        if dim > MAX_DIMENSION {
            return Err(Error::Schema(format!("family has {dim} parameters, the cap is {MAX_DIMENSION}")));
        }
        Ok(())
    }

    pub fn dimension(&self, horizon: usize) -> usize {
        match self {
            Self::Affine { memory } => 2 * horizon + memory.iter().filter(|&&m| m).count(),
            Self::Tabular { knots } => horizon * knots,
        }
    }

    pub fn parameter_names(&self, horizon: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dimension(horizon));
        for t in 1..=horizon {
            match self {
                Self::Affine { memory } => {
                    names.push(format!("slope_t{t}"));
                    if memory[t - 1] {
                        names.push(format!("prev_slope_t{t}"));
                    }
                    names.push(format!("intercept_t{t}"));
                }
                Self::Tabular { knots } => names.extend((0..*knots).map(|k| format!("knot_t{t}_{k}"))),
            }
        }
        names
    }

    /// Search box: affine coefficients in `[-bound, bound]`, tabular values in
    /// the allocation range.
    pub fn bounds(&self, env: &Environment, bound: f64) -> Vec<(f64, f64)> {
        match self {
            Self::Affine { .. } => vec![(-bound, bound); self.dimension(env.horizon())],
            Self::Tabular { knots } => {
                (1..=env.horizon()).flat_map(|t| std::iter::repeat(env.allocation_range(t)).take(*knots)).collect()
            }
        }
    }

    pub fn rule(&self, env: &Environment, params: &[f64]) -> Result<AllocationRule> {
        let horizon = env.horizon();
        self.validate(horizon)?;
        if params.len() != self.dimension(horizon) {
            return Err(Error::Schema(format!(
                "{} parameters for a family of dimension {}",
                params.len(),
                self.dimension(horizon)
            )));
        }
        let ranges: Vec<(f64, f64)> = (1..=horizon).map(|t| env.allocation_range(t)).collect();
        match self {
            Self::Affine { memory } => {
                let mut rest = params;
                let mut periods = Vec::with_capacity(horizon);
                for &m in memory {
                    let take = if m { 3 } else { 2 };
                    let (own, tail) = rest.split_at(take);
                    rest = tail;
                    let mut terms = vec![Monomial::new(own[0], 1, 0), Monomial::new(own[take - 1], 0, 0)];
                    if m {
                        terms.push(Monomial::new(own[1], 0, 1));
                    }
                    periods.push(StateFn::Poly(Poly2::new(terms)));
                }
                AllocationRule::new(periods, ranges, memory.clone())
            }
            Self::Tabular { knots } => {
                let periods = params
                    .chunks(*knots)
                    .enumerate()
                    .map(|(k, values)| {
                        let grid = env.grid(k + 1);
                        let step = (grid.hi() - grid.lo()) / (*knots - 1) as f64;
                        let points = (0..*knots).map(|j| grid.lo() + step * j as f64).collect();
                        NodeTable::new(points, values.to_vec()).map(StateFn::Nodes)
                    })
                    .collect::<Result<_>>()?;
                AllocationRule::markov(periods, ranges)
            }
        }
    }
}
