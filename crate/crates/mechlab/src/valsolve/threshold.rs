use serde::Serialize;

use super::ValueSolution;
use crate::error::{Error, Result};

/// Upper end of a down-closed stopping region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cut {
    /// Empty region: the agent never stops here.
    Never,
    /// Stops at nodes `0..=node`.
    At { node: usize, value: f64 },
}

impl Cut {
    /// Cutoff value, `-inf` when never stopping.
    pub fn value(&self) -> f64 {
        match *self {
            Self::Never => f64::NEG_INFINITY,
            Self::At { value, .. } => value,
        }
    }

    pub fn node(&self) -> Option<usize> {
        match *self {
            Self::Never => None,
            Self::At { node, .. } => Some(node),
        }
    }
}

/// Cut of a stop-flag row; fails at the first stop node that follows a
/// continuation node.
pub fn cut_of_row(period: usize, flags: &[bool], points: &[f64]) -> Result<Cut> {
    let top = flags.iter().take_while(|&&s| s).count();
    if let Some(offset) = flags[top..].iter().position(|&s| s) {
        return Err(Error::NotThreshold { period, node: top + offset });
    }
    Ok(match top {
        0 => Cut::Never,
        k => Cut::At { node: k - 1, value: points[k - 1] },
    })
}

/// Thresholds per period and context.
pub fn extract_threshold(solution: &ValueSolution) -> Result<Vec<Vec<Cut>>> {
    solution
        .periods
        .iter()
        .map(|p| {
            p.stop
                .iter()
                .map(|row| cut_of_row(p.period, row, &p.points))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}
