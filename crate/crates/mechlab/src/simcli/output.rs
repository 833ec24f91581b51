use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Format;
use crate::error::Result;
use crate::icver::{gap_matrix, Branch};
use crate::lattice::Lattice;
use crate::paysynth::Synthesis;
use crate::valsolve::ValueSolution;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_owned())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Int(usize::from(v))
    }
}

/// Column-named numeric table; JSON form is `{columns, rows}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Writes `stem.csv` or `stem.json` under `dir`.
pub fn write_table(dir: &Path, stem: &str, format: Format, table: &Table) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            table.write_csv(BufWriter::new(File::create(&path)?))?;
            Ok(path)
        }
        Format::Json => write_json(dir, &format!("{stem}.json"), table),
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}

/// Value tables of period `t`, one row per (context, node).
pub fn value_table(solution: &ValueSolution, t: usize) -> Table {
    let p = solution.period(t);
    let mut table = Table::new(&["node", "theta", "context", "V", "J_stop", "C", "L", "mu", "mu_bar", "stop"]);
    for c in 0..p.value.contexts() {
        for (i, &theta) in p.points.iter().enumerate() {
            table.push(vec![
                i.into(),
                theta.into(),
                c.into(),
                p.value[(c, i)].into(),
                p.stop_payoff[(c, i)].into(),
                p.continuation[(c, i)].into(),
                p.marginal[(c, i)].into(),
                p.continuing[(c, i)].into(),
                p.continuing_free[(c, i)].into(),
                p.stop[c][i].into(),
            ]);
        }
    }
    table
}

/// Potentials and synthesized payments of period `t`.
pub fn potential_table(lattice: &Lattice, synthesis: &Synthesis, t: usize) -> Table {
    let points = lattice.grid(t).points();
    let (stop, cont) = (&synthesis.potentials.stop[t - 1], &synthesis.potentials.cont[t - 1]);
    let (phi, xi) = (&synthesis.payments.continuing[t - 1], &synthesis.payments.terminal[t - 1]);
    let mut table = Table::new(&["node", "theta", "context", "beta_stop", "beta_cont", "spread", "phi", "xi"]);
    for c in 0..stop.contexts() {
        for (i, &theta) in points.iter().enumerate() {
            table.push(vec![
                i.into(),
                theta.into(),
                c.into(),
                stop[(c, i)].into(),
                cont[(c, i)].into(),
                (cont[(c, i)] - stop[(c, i)]).into(),
                phi[(c, i)].into(),
                xi[(c, i)].into(),
            ]);
        }
    }
    table
}

/// Thresholds by period, including the final period's top.
pub fn threshold_table(cutoffs: &[(usize, f64)]) -> Table {
    let mut table = Table::new(&["period", "eta"]);
    for &(t, eta) in cutoffs {
        table.push(vec![t.into(), eta.into()]);
    }
    table
}

/// Heat-map data of misreport gains in long form for one period and context.
pub fn gap_table(lattice: &Lattice, solution: &ValueSolution, t: usize, c: usize, branch: Branch) -> Table {
    let points = lattice.grid(t).points();
    let gaps = gap_matrix(lattice, solution, t, c, branch);
    let mut table = Table::new(&["theta", "theta_hat", "gap"]);
    for (i, row) in gaps.iter().enumerate() {
        for (j, &gap) in row.iter().enumerate() {
            table.push(vec![points[i].into(), points[j].into(), gap.into()]);
        }
    }
    table
}

/// Optimized parameters against a reference point.
pub fn comparison_table(names: &[String], found: &[f64], reference: &[f64]) -> Table {
    let mut table = Table::new(&["parameter", "found", "reference", "abs_error"]);
    for ((name, &f), &r) in names.iter().zip(found).zip(reference) {
        table.push(vec![name.as_str().into(), f.into(), r.into(), (f - r).abs().into()]);
    }
    table
}
