use serde::Serialize;

use crate::envlab::sampler::{path_rng, sample_path};
use crate::envlab::Environment;
use crate::error::{Error, Result};
use crate::mechcore::{Mechanism, ReportingStrategy, StoppingPolicy};
use crate::par::map_range;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub mean: f64,
    pub stderr: f64,
}

impl Moment {
    /// Sums run in index order so the result does not depend on scheduling.
    fn of(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let (n, sum) = samples.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
        let mean = sum / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McStats {
    pub paths: usize,
    pub seed: u64,
    pub agent_payoff: Moment,
    pub principal_payoff: Moment,
    pub stop_time: Moment,
    /// Share of paths stopping in each period.
    pub stop_distribution: Vec<f64>,
}

/// Simulates `paths` independent paths; path `k` draws from stream `k` of `seed`.
pub fn monte_carlo(
    env: &Environment,
    mech: &Mechanism,
    strategy: &ReportingStrategy,
    policy: &StoppingPolicy,
    paths: usize,
    seed: u64,
) -> Result<McStats> {
    if paths == 0 {
        return Err(Error::Schema("Monte Carlo needs at least one path".into()));
    }
    let draws = map_range(paths, |k| {
        sample_path(env, mech, strategy, policy, &mut path_rng(seed, k as u64))
            .map(|p| (p.agent_payoff, p.principal_payoff, p.stop_time))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut stops = vec![0usize; env.horizon()];
    for &(_, _, tau) in &draws {
        stops[tau - 1] += 1;
    }
    Ok(McStats {
        paths,
        seed,
        agent_payoff: Moment::of(draws.iter().map(|d| d.0)),
        principal_payoff: Moment::of(draws.iter().map(|d| d.1)),
        stop_time: Moment::of(draws.iter().map(|d| d.2 as f64)),
        stop_distribution: stops.iter().map(|&s| s as f64 / paths as f64).collect(),
    })
}
