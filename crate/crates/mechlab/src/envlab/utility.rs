use serde::Serialize;

use crate::error::{Error, Result};

/// `coef * x^x_pow * y^y_pow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    pub x_pow: u32,
    pub y_pow: u32,
}

impl Monomial {
    pub fn new(coef: f64, x_pow: u32, y_pow: u32) -> Self {
        Self { coef, x_pow, y_pow }
    }
}

/// Bivariate polynomial. Utilities read it as (state, allocation); rules read it
/// as (current state, previous state).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Poly2 {
    terms: Vec<Monomial>,
}

impl Poly2 {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(k: f64) -> Self {
        Self::new(vec![Monomial::new(k, 0, 0)])
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|m| m.coef * small_pow(x, m.x_pow) * small_pow(y, m.y_pow)).sum()
    }

    /// Analytic partial derivative in the first variable.
    pub fn d_dx(&self) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .filter(|m| m.x_pow > 0)
                .map(|m| Monomial::new(m.coef * m.x_pow as f64, m.x_pow - 1, m.y_pow))
                .collect(),
        )
    }

    pub fn uses_y(&self) -> bool {
        self.terms.iter().any(|m| m.y_pow > 0 && m.coef != 0.0)
    }

    pub fn degree_x(&self) -> usize {
        self.terms.iter().map(|m| m.x_pow as usize).max().unwrap_or(0)
    }

    /// Coefficients of the univariate polynomial in `x` obtained by fixing `y`,
    /// lowest power first.
    pub fn slice_at_y(&self, y: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.degree_x() + 1];
        for m in &self.terms {
            c[m.x_pow as usize] += m.coef * y.powi(m.y_pow as i32);
        }
        c
    }

    /// Coefficients of the univariate polynomial in `y` obtained by fixing `x`,
    /// lowest power first.
    pub fn slice_at_x(&self, x: f64) -> Vec<f64> {
        let degree = self.terms.iter().map(|m| m.y_pow as usize).max().unwrap_or(0);
        let mut c = vec![0.0; degree + 1];
        for m in &self.terms {
            c[m.y_pow as usize] += m.coef * small_pow(x, m.x_pow);
        }
        c
    }

    pub fn plus_constant(&self, k: f64) -> Poly2 {
        let mut terms = self.terms.clone();
        terms.push(Monomial::new(k, 0, 0));
        Poly2::new(terms)
    }

    pub fn scaled(&self, k: f64) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .map(|m| Monomial::new(m.coef * k, m.x_pow, m.y_pow))
                .collect(),
        )
    }
}

/// Horner evaluation of coefficients produced by [`Poly2::slice_at_y`] or
/// [`Poly2::slice_at_x`].
pub fn horner(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Integer power with the common low degrees unrolled.
fn small_pow(x: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(n as i32),
    }
}

/// One participant's per-period utility `u_t(state, allocation)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilitySpec {
    periods: Vec<Poly2>,
    derivatives: Vec<Poly2>,
    explicit_derivatives: bool,
    monotone_in_state: bool,
}

impl UtilitySpec {
    /// Derivatives come from differentiating the polynomials.
    pub fn new(periods: Vec<Poly2>) -> Self {
        let derivatives = periods.iter().map(Poly2::d_dx).collect();
        Self { periods, derivatives, explicit_derivatives: false, monotone_in_state: false }
    }

    /// Supplies closed-form state derivatives; they are checked against finite
    /// differences when the environment is built.
    pub fn with_derivatives(mut self, derivatives: Vec<Poly2>) -> Result<Self> {
        if derivatives.len() != self.periods.len() {
            return Err(Error::Schema(format!(
                "{} derivative polynomials for {} periods",
                derivatives.len(),
                self.periods.len()
            )));
        }
        self.derivatives = derivatives;
        self.explicit_derivatives = true;
        Ok(self)
    }

    pub fn monotone(mut self, flag: bool) -> Self {
        self.monotone_in_state = flag;
        self
    }

    /// Repeats a single-period specification over `horizon` periods.
    pub fn broadcast(mut self, horizon: usize) -> Result<Self> {
        match self.periods.len() {
            n if n == horizon => Ok(self),
            1 => {
                self.periods = vec![self.periods[0].clone(); horizon];
                self.derivatives = vec![self.derivatives[0].clone(); horizon];
                Ok(self)
            }
            n => Err(Error::Schema(format!("utility given for {n} periods, horizon is {horizon}"))),
        }
    }

    pub fn periods(&self) -> usize {
        self.periods.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone_in_state
    }

    pub fn has_explicit_derivatives(&self) -> bool {
        self.explicit_derivatives
    }

    /// Utility polynomial of 1-based period `t`.
    pub fn poly(&self, t: usize) -> &Poly2 {
        &self.periods[t - 1]
    }

    pub fn derivative_poly(&self, t: usize) -> &Poly2 {
        &self.derivatives[t - 1]
    }

    pub fn value(&self, t: usize, state: f64, allocation: f64) -> f64 {
        self.periods[t - 1].eval(state, allocation)
    }

    pub fn state_derivative(&self, t: usize, state: f64, allocation: f64) -> f64 {
        self.derivatives[t - 1].eval(state, allocation)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            periods: self.periods.iter().map(|p| p.scaled(k)).collect(),
            derivatives: self.derivatives.iter().map(|p| p.scaled(k)).collect(),
            explicit_derivatives: self.explicit_derivatives,
            monotone_in_state: self.monotone_in_state,
        }
    }
}
