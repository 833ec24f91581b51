use serde::Serialize;

use super::{synthesize_on, SynthesisOptions};
use crate::error::Result;
use crate::lattice::{Field, Lattice};

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Ex-ante difference of expected payment streams per exit period.
    pub constants: Vec<f64>,
    /// Difference of posted prices per period.
    pub posted_shift: Vec<f64>,
    /// Largest distance of a conditional difference from its row mean.
    pub max_state_deviation: f64,
    pub passed: bool,
}

/// Expected discounted payments from period `t` on when the exit is forced at
/// `horizon`, for `t = 1..=horizon`.
fn payment_streams(lattice: &Lattice, horizon: usize) -> Vec<Field> {
    let env = lattice.env();
    let weight = env.discount_pow(horizon);
    let rho = lattice.posted(horizon);
    let mut out = vec![lattice.layer(horizon).terminal.map(|x| weight * x + rho)];
    for s in (1..horizon).rev() {
        let ahead = lattice.expect_all(s, out.last().expect("later period"));
        let weight = env.discount_pow(s);
        out.push(lattice.layer(s).continuing.zip_map(&ahead, |p, e| weight * p + e));
    }
    out.reverse();
    out
}

/// Builds payments from two anchor vectors with the same thresholds and checks
/// that the expected payment streams differ by a state-independent constant
/// for every forced exit period.
pub fn revenue_equivalence(base: &Lattice, anchors_a: &[f64], anchors_b: &[f64], eta: &[f64]) -> Result<EquivalenceReport> {
    let build = |anchors: &[f64]| {
        let opts = SynthesisOptions { anchors: Some(anchors.to_vec()), eta: eta.to_vec(), strict_literal: false };
        synthesize_on(base, &opts).and_then(|s| s.lattice(base))
    };
    let (la, lb) = (build(anchors_a)?, build(anchors_b)?);
    let initial = base.env().initial_weights(None);
    let mut constants = Vec::with_capacity(base.horizon());
    let mut deviation: f64 = 0.0;
    for tau in 1..=base.horizon() {
        let (pa, pb) = (payment_streams(&la, tau), payment_streams(&lb, tau));
        for (fa, fb) in pa.iter().zip(&pb) {
            for (ra, rb) in fa.rows().iter().zip(fb.rows()) {
                let diff: Vec<f64> = ra.iter().zip(rb).map(|(a, b)| a - b).collect();
                let mean = diff.iter().sum::<f64>() / diff.len() as f64;
                deviation = diff.iter().fold(deviation, |m, d| m.max((d - mean).abs()));
            }
        }
        constants.push(initial.dot(pa[0].row(0)) - initial.dot(pb[0].row(0)));
    }
    let posted_shift = la.posted_prices().iter().zip(lb.posted_prices()).map(|(a, b)| a - b).collect();
    Ok(EquivalenceReport {
        constants,
        posted_shift,
        max_state_deviation: deviation,
        passed: deviation <= EQUIVALENCE_TOLERANCE,
    })
}
