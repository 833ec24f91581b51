use serde::Serialize;

use super::statefn::StateFn;
use crate::error::{Error, Result};

/// Per-period allocation rules with their declared ranges. Values are clamped
/// into the range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRule {
    periods: Vec<StateFn>,
    ranges: Vec<(f64, f64)>,
    memory: Vec<bool>,
}

impl AllocationRule {
    /// `memory[t-1]` opts period `t` into a dependence on the previous report.
    pub fn new(periods: Vec<StateFn>, ranges: Vec<(f64, f64)>, memory: Vec<bool>) -> Result<Self> {
        let n = periods.len();
        if n == 0 || ranges.len() != n || memory.len() != n {
            return Err(Error::Schema(format!(
                "allocation rule has {n} periods, {} ranges and {} memory flags",
                ranges.len(),
                memory.len()
            )));
        }
        if memory[0] {
            return Err(Error::Memory("period 1 has no previous report".into()));
        }
        for (k, (f, &m)) in periods.iter().zip(&memory).enumerate() {
            if f.uses_memory() && !m {
                return Err(Error::Memory(format!(
                    "period {} rule depends on the previous report without the memory flag",
                    k + 1
                )));
            }
        }
        for (k, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Schema(format!("allocation range of period {} is [{lo}, {hi}]", k + 1)));
            }
        }
        Ok(Self { periods, ranges, memory })
    }

    /// Memoryless rules.
    pub fn markov(periods: Vec<StateFn>, ranges: Vec<(f64, f64)>) -> Result<Self> {
        let memory = vec![false; periods.len()];
        Self::new(periods, ranges, memory)
    }

    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    pub fn rule(&self, t: usize) -> &StateFn {
        &self.periods[t - 1]
    }

    pub fn range(&self, t: usize) -> (f64, f64) {
        self.ranges[t - 1]
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn has_memory(&self, t: usize) -> bool {
        self.memory[t - 1]
    }

    pub fn memory_flags(&self) -> &[bool] {
        &self.memory
    }

    /// `α_t(report)` clamped into the declared range.
    pub fn eval(&self, t: usize, report: f64, prev: Option<f64>) -> Result<f64> {
        let (lo, hi) = self.range(t);
        Ok(self.periods[t - 1].eval(report, prev)?.clamp(lo, hi))
    }
}

/// Intermediate, terminal and posted-price payments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentRules {
    continuing: Vec<StateFn>,
    terminal: Vec<StateFn>,
    posted: Vec<f64>,
}

impl PaymentRules {
    /// The last posted price must be exactly zero.
    pub fn new(continuing: Vec<StateFn>, terminal: Vec<StateFn>, posted: Vec<f64>) -> Result<Self> {
        let n = posted.len();
        if n == 0 || continuing.len() != n || terminal.len() != n {
            return Err(Error::Schema(format!(
                "payments have {} continuing, {} terminal and {n} posted entries",
                continuing.len(),
                terminal.len()
            )));
        }
        if posted[n - 1] != 0.0 {
            return Err(Error::Schema(format!(
                "posted price at the final period must be 0, got {}",
                posted[n - 1]
            )));
        }
        if posted.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite(posted));
        }
        Ok(Self { continuing, terminal, posted })
    }

    pub fn zero(horizon: usize) -> Self {
        Self {
            continuing: vec![StateFn::zero(); horizon],
            terminal: vec![StateFn::zero(); horizon],
            posted: vec![0.0; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.posted.len()
    }

    pub fn continuing(&self, t: usize) -> &StateFn {
        &self.continuing[t - 1]
    }

    pub fn terminal(&self, t: usize) -> &StateFn {
        &self.terminal[t - 1]
    }

    /// `ρ(t)`.
    pub fn posted(&self, t: usize) -> f64 {
        self.posted[t - 1]
    }

    pub fn posted_prices(&self) -> &[f64] {
        &self.posted
    }

    pub fn with_posted(&self, posted: Vec<f64>) -> Result<Self> {
        Self::new(self.continuing.clone(), self.terminal.clone(), posted)
    }

    pub fn with_continuing(&self, t: usize, f: StateFn) -> Self {
        let mut p = self.clone();
        p.continuing[t - 1] = f;
        p
    }

    pub fn with_terminal(&self, t: usize, f: StateFn) -> Self {
        let mut p = self.clone();
        p.terminal[t - 1] = f;
        p
    }

    /// Scales every transfer by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            continuing: self.continuing.iter().map(|f| f.scaled(k)).collect(),
            terminal: self.terminal.iter().map(|f| f.scaled(k)).collect(),
            posted: self.posted.iter().map(|r| r * k).collect(),
        }
    }

    pub fn uses_memory(&self, t: usize) -> bool {
        self.continuing[t - 1].uses_memory() || self.terminal[t - 1].uses_memory()
    }
}

/// Allocation plus payments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mechanism {
    allocation: AllocationRule,
    payments: PaymentRules,
}

/// Outcome of evaluating a mechanism on one report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub allocation: f64,
    pub continuing: f64,
    pub terminal: f64,
}

impl Mechanism {
    pub fn new(allocation: AllocationRule, payments: PaymentRules) -> Result<Self> {
        if allocation.horizon() != payments.horizon() {
            return Err(Error::Schema(format!(
                "allocation covers {} periods, payments {}",
                allocation.horizon(),
                payments.horizon()
            )));
        }
        for t in 1..=payments.horizon() {
            if payments.uses_memory(t) && !allocation.has_memory(t) {
                return Err(Error::Memory(format!(
                    "period {t} payments depend on the previous report without the memory flag"
                )));
            }
        }
        Ok(Self { allocation, payments })
    }

    pub fn horizon(&self) -> usize {
        self.allocation.horizon()
    }

    pub fn allocation(&self) -> &AllocationRule {
        &self.allocation
    }

    pub fn payments(&self) -> &PaymentRules {
        &self.payments
    }

    pub fn with_payments(&self, payments: PaymentRules) -> Result<Self> {
        Self::new(self.allocation.clone(), payments)
    }

    /// `(α_t, φ_t, ξ_t)` at a report; `prev` is the previous report.
    pub fn eval(&self, t: usize, report: f64, prev: Option<f64>) -> Result<Outcome> {
        Ok(Outcome {
            allocation: self.allocation.eval(t, report, prev)?,
            continuing: self.payments.continuing(t).eval(report, prev)?,
            terminal: self.payments.terminal(t).eval(report, prev)?,
        })
    }

    /// Re-checks the final posted price.
    pub fn assert_final_posted_zero(&self) -> Result<()> {
        let r = self.payments.posted(self.horizon());
        if r != 0.0 {
            return Err(Error::Schema(format!("posted price at the final period is {r}")));
        }
        Ok(())
    }
}
