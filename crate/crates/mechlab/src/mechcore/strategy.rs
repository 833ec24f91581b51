use serde::Serialize;

use crate::envlab::grid::PeriodGrid;
use crate::error::{Error, Result};

/// How a true state is turned into a report in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportMap {
    Truthful,
    Constant { report: f64 },
    /// Report at each node of the period grid; off-node states use the nearest node.
    Table { reports: Vec<f64> },
}

impl ReportMap {
    fn apply(&self, theta: f64, grid: &PeriodGrid) -> f64 {
        match self {
            Self::Truthful => theta,
            Self::Constant { report } => *report,
            Self::Table { reports } => reports[grid.nearest(theta).min(reports.len() - 1)],
        }
    }
}

/// Reporting strategy over the whole horizon. Reports are clamped into the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportingStrategy {
    Truthful,
    /// Misreport only at `period`.
    OneShot { period: usize, map: ReportMap },
    Arbitrary { maps: Vec<ReportMap> },
}

impl ReportingStrategy {
    pub fn truthful() -> Self {
        Self::Truthful
    }

    pub fn one_shot(period: usize, map: ReportMap) -> Self {
        Self::OneShot { period, map }
    }

    pub fn arbitrary(maps: Vec<ReportMap>) -> Self {
        Self::Arbitrary { maps }
    }

    /// Report in period `t` for true state `theta`.
    pub fn report(&self, t: usize, theta: f64, grid: &PeriodGrid) -> f64 {
        let raw = match self {
            Self::Truthful => theta,
            Self::OneShot { period, map } if *period == t => map.apply(theta, grid),
            Self::OneShot { .. } => theta,
            Self::Arbitrary { maps } => maps.get(t - 1).map_or(theta, |m| m.apply(theta, grid)),
        };
        raw.clamp(grid.lo(), grid.hi())
    }
}

/// When the agent exits.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingPolicy {
    /// Stop at the first `t` with `θ_t ≤ η(t)`; the last entry is the final grid's top.
    Threshold { cutoffs: Vec<f64> },
    /// Stop flag per node; off-node states use the nearest node. The last period
    /// always stops.
    Regions { stop: Vec<Vec<bool>> },
}

impl StoppingPolicy {
    /// `cutoffs` for periods `1..T-1`; the final cutoff is set to the top of grid `T`.
    pub fn threshold(cutoffs: &[f64], final_top: f64) -> Self {
        let mut c = cutoffs.to_vec();
        c.push(final_top);
        Self::Threshold { cutoffs: c }
    }

    /// Full cutoff vector including period `T`.
    pub fn from_cutoffs(cutoffs: Vec<f64>, final_top: f64) -> Result<Self> {
        match cutoffs.last() {
            Some(&last) if last >= final_top => Ok(Self::Threshold { cutoffs }),
            _ => Err(Error::Schema(format!(
                "final cutoff must reach the top of the last grid ({final_top})"
            ))),
        }
    }

    pub fn always_stop(horizon: usize, final_top: f64) -> Self {
        let mut c = vec![f64::INFINITY; horizon.saturating_sub(1)];
        c.push(final_top);
        Self::Threshold { cutoffs: c }
    }

    pub fn stops(&self, t: usize, theta: f64, grid: &PeriodGrid, horizon: usize) -> bool {
        if t >= horizon {
            return true;
        }
        match self {
            Self::Threshold { cutoffs } => theta <= cutoffs[t - 1],
            Self::Regions { stop } => stop[t - 1][grid.nearest(theta)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PeriodGrid {
        PeriodGrid::uniform(1, 0.0, 1.0, 11).unwrap()
    }

    #[test]
    fn truthful_reports_the_state() {
        assert_eq!(ReportingStrategy::truthful().report(1, 0.37, &grid()), 0.37);
    }

    #[test]
    fn one_shot_deviates_only_in_its_period() {
        let s = ReportingStrategy::one_shot(1, ReportMap::Constant { report: 0.3 });
        assert_eq!(s.report(1, 0.9, &grid()), 0.3);
        assert_eq!(s.report(2, 0.9, &grid()), 0.9);
    }

    #[test]
    fn reports_are_clamped_into_the_grid() {
        let s = ReportingStrategy::one_shot(1, ReportMap::Constant { report: 4.0 });
        assert_eq!(s.report(1, 0.2, &grid()), 1.0);
    }

    #[test]
    fn threshold_policies_respect_order() {
        let g = grid();
        let p = StoppingPolicy::threshold(&[0.4], 5.0);
        assert!(p.stops(1, 0.4, &g, 2));
        assert!(p.stops(1, 0.1, &g, 2));
        assert!(!p.stops(1, 0.5, &g, 2));
        assert!(p.stops(2, 4.9, &g, 2));
    }
}
