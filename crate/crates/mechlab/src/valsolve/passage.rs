use crate::error::Result;
use crate::lattice::{Field, Lattice, Measure};

/// `E[τ]` under truthful play and the threshold rule `θ_t ≤ cutoffs[t-1]`
/// (`cutoffs` covers `t < T`; period `T` always stops).
pub fn mean_first_passage(lattice: &Lattice, cutoffs: &[f64]) -> Result<f64> {
    let ones: Vec<Field> = (1..=lattice.horizon())
        .map(|t| Field::filled(lattice.contexts(t), lattice.grid(t).len(), 1.0))
        .collect();
    lattice.survival_sum(&ones, cutoffs, Measure::Kernel, None)
}
