use super::envelope::EnvelopeTable;
use crate::envlab::Environment;
use crate::error::{Error, Result};
use crate::lattice::{Field, Lattice};

/// Integrals of the envelope derivatives, zero at each period's anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pub anchors: Vec<f64>,
    /// Potential of exiting now.
    pub stop: Vec<Field>,
    /// Potential of continuing: the best forced-exit integral over later exits,
    /// shifted so that it vanishes at the anchor.
    pub cont: Vec<Field>,
}

impl PotentialTable {
    pub fn horizon(&self) -> usize {
        self.stop.len()
    }

    /// Continuing minus stopping potential at period `t`.
    pub fn spread(&self, t: usize) -> Field {
        self.cont[t - 1].zip_map(&self.stop[t - 1], |a, b| a - b)
    }
}

/// Grid bottoms.
pub fn default_anchors(env: &Environment) -> Vec<f64> {
    env.grids().iter().map(|g| g.lo()).collect()
}

pub fn potentials(lattice: &Lattice, table: &EnvelopeTable, anchors: &[f64]) -> Result<PotentialTable> {
    let horizon = lattice.horizon();
    if anchors.len() != horizon {
        return Err(Error::Schema(format!("{} anchors for {horizon} periods", anchors.len())));
    }
    let mut stop = Vec::with_capacity(horizon);
    let mut cont = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let grid = lattice.grid(t);
        let anchor = anchors[t - 1];
        if !(grid.lo()..=grid.hi()).contains(&anchor) {
            return Err(Error::Index(format!("anchor {anchor} outside grid {t} [{}, {}]", grid.lo(), grid.hi())));
        }
        let mut s_rows = Vec::with_capacity(lattice.contexts(t));
        let mut c_rows = Vec::with_capacity(lattice.contexts(t));
        for c in 0..lattice.contexts(t) {
            // integrals from the grid bottom, one per exit period
            let integrals: Vec<(Vec<f64>, f64)> = (t..=horizon)
                .map(|tau| {
                    let g = table.at(t, tau).row(c);
                    let cum = grid.cumulative_integral(g);
                    let at_anchor = grid.integral_with(g, &cum, anchor);
                    (cum, at_anchor)
                })
                .collect();
            let (own, own_anchor) = &integrals[0];
            s_rows.push(own.iter().map(|v| v - own_anchor).collect());
            let best_anchor = integrals.iter().map(|(_, a)| *a).fold(f64::NEG_INFINITY, f64::max);
            let best: Vec<f64> = (0..grid.len())
                .map(|i| integrals.iter().map(|(cum, _)| cum[i]).fold(f64::NEG_INFINITY, f64::max) - best_anchor)
                .collect();
            c_rows.push(best);
        }
        stop.push(Field::new(s_rows));
        cont.push(Field::new(c_rows));
    }
    // one exit period left: both potentials coincide
    cont[horizon - 1] = stop[horizon - 1].clone();
    Ok(PotentialTable { anchors: anchors.to_vec(), stop, cont })
}
