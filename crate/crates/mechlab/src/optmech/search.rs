use rand::Rng;
use serde::{Deserialize, Serialize};

use super::objective::central_gradient;
use crate::envlab::sampler::path_rng;
use crate::error::{Error, Result};
use crate::par::map_range;

/// `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// A line optimum this close to its bracket end (as a bracket fraction) widens the bracket.
const EDGE_FRACTION: f64 = 0.02;
const MAX_WIDENINGS: usize = 8;
/// Line searches resolve their bracket to at least this fraction.
const BRACKET_RESOLUTION: f64 = 1e-3;
/// Relative gain of a whole sweep below which a restart stops.
const STALL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub seed: u64,
    /// Parameter resolution of each line search.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Half-width of the affine coefficient box.
    pub coefficient_bound: f64,
    pub gradient_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { starts: 8, seed: 0, tolerance: 1e-7, max_sweeps: 200, coefficient_bound: 10.0, gradient_step: 1e-4 }
    }
}

/// One multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Restart {
    pub start: Vec<f64>,
    pub params: Vec<f64>,
    pub value: f64,
    pub sweeps: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
    pub best_restart: usize,
    pub restarts: Vec<Restart>,
}

/// Counts evaluations and rejects non-finite values.
struct Counted<'a, F> {
    f: &'a F,
    calls: usize,
}

impl<F: Fn(&[f64]) -> Result<f64>> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.calls += 1;
        let v = (self.f)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(x.to_vec()))
        }
    }
}

/// Golden-section maximum of `f` on `[lo, hi]`, returned as `(argument, value)`.
fn golden(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Maximizes along `x + s·dir` for `s` in `[-radius, radius]`, clipped to the
/// box, widening the bracket while the optimum sits on an inner bracket end.
/// Moves `x` only on a strict improvement of `fx`; returns the step taken.
fn line_search<F: Fn(&[f64]) -> Result<f64>>(
    f: &mut Counted<F>,
    bounds: &[(f64, f64)],
    x: &mut [f64],
    fx: &mut f64,
    dir: &[f64],
    mut radius: f64,
    tol: f64,
) -> Result<f64> {
    let (box_lo, box_hi) = step_limits(bounds, x, dir);
    if box_hi - box_lo <= tol {
        return Ok(0.0);
    }
    let mut probe = x.to_vec();
    let mut best = (0.0, *fx);
    for _ in 0..MAX_WIDENINGS {
        let (lo, hi) = ((-radius).max(box_lo), radius.min(box_hi));
        let tol = tol.max(BRACKET_RESOLUTION * (hi - lo));
        let (s, v) = golden(
            |s| {
                for ((p, &xi), &d) in probe.iter_mut().zip(x.iter()).zip(dir) {
                    *p = xi + s * d;
                }
                f.eval(&probe)
            },
            lo,
            hi,
            tol,
        )?;
        if v > best.1 {
            best = (s, v);
        }
        let edge = EDGE_FRACTION * (hi - lo);
        let inner_edge = (s - lo < edge && lo > box_lo) || (hi - s < edge && hi < box_hi);
        if !inner_edge {
            break;
        }
        radius *= 4.0;
    }
    let (s, v) = best;
    if s != 0.0 {
        for (xi, &d) in x.iter_mut().zip(dir) {
            *xi += s * d;
        }
        *fx = v;
    }
    Ok(s)
}

/// Range of `s` keeping `x + s·dir` inside the box.
fn step_limits(bounds: &[(f64, f64)], x: &[f64], dir: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&(b_lo, b_hi), &xi), &d) in bounds.iter().zip(x).zip(dir) {
        if d > 0.0 {
            lo = lo.max((b_lo - xi) / d);
            hi = hi.min((b_hi - xi) / d);
        } else if d < 0.0 {
            lo = lo.max((b_hi - xi) / d);
            hi = hi.min((b_lo - xi) / d);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Golden-section line searches along a direction set that starts as the
/// coordinate axes; after each sweep the net displacement replaces the
/// direction of largest gain when that passes Powell's test, which makes the
/// set conjugate on quadratic objectives.
fn climb<F: Fn(&[f64]) -> Result<f64>>(
    f: &F,
    bounds: &[(f64, f64)],
    start: Vec<f64>,
    config: &OptimizerConfig,
) -> Result<Restart> {
    let dim = bounds.len();
    let mut counted = Counted { f, calls: 0 };
    let mut x = start.clone();
    let mut fx = counted.eval(&x)?;
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut d = vec![0.0; dim];
            d[k] = 1.0;
            d
        })
        .collect();
    let mut radius: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let floor = 10.0 * config.tolerance;
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let (before, f_before) = (x.clone(), fx);
        let (mut biggest, mut biggest_gain) = (0, 0.0);
        for k in 0..dim {
            let f_prev = fx;
            let step = line_search(&mut counted, bounds, &mut x, &mut fx, &dirs[k], radius[k], config.tolerance)?;
            radius[k] = (4.0 * step.abs()).max(floor);
            if fx - f_prev > biggest_gain {
                (biggest, biggest_gain) = (k, fx - f_prev);
            }
        }
        if 2.0 * (fx - f_before) <= STALL * (f_before.abs() + fx.abs()) + f64::MIN_POSITIVE {
            break;
        }
        let shift: Vec<f64> = x.iter().zip(&before).map(|(a, b)| a - b).collect();
        let scale = shift.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if scale <= config.tolerance || dim == 1 {
            continue;
        }
        let reflected: Vec<f64> = x.iter().zip(&shift).map(|(a, d)| a + d).collect();
        let inside = reflected.iter().zip(bounds).all(|(v, (lo, hi))| (lo..=hi).contains(&v));
        if !inside {
            continue;
        }
        // Powell's test, written for maximization.
        let f_reflected = counted.eval(&reflected)?;
        if f_reflected > f_before {
            let (a, b) = (f_before - 2.0 * fx + f_reflected, f_before - fx + biggest_gain);
            let test = 2.0 * a * b * b + biggest_gain * (f_before - f_reflected).powi(2);
            if test > 0.0 {
                let dir: Vec<f64> = shift.iter().map(|d| d / scale).collect();
                let step = line_search(&mut counted, bounds, &mut x, &mut fx, &dir, 4.0 * scale, config.tolerance)?;
                dirs[biggest] = dirs[dim - 1].clone();
                radius[biggest] = radius[dim - 1];
                dirs[dim - 1] = dir;
                radius[dim - 1] = (4.0 * step.abs()).max(4.0 * scale);
            }
        }
    }
    Ok(Restart { start, params: x, value: fx, sweeps, evaluations: counted.calls })
}

/// Multi-start maximization of `f` over a box. Starts are drawn uniformly from
/// the box with one seeded stream per start, so results do not depend on the
/// order in which restarts run.
pub fn maximize<F>(bounds: &[(f64, f64)], f: F, config: &OptimizerConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if bounds.is_empty() || config.starts == 0 {
        return Err(Error::Schema("optimizer needs at least one parameter and one start".into()));
    }
    if let Some((k, _)) = bounds.iter().enumerate().find(|(_, (lo, hi))| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::Schema(format!("parameter {k} has an invalid search range")));
    }
    let restarts = map_range(config.starts, |s| {
        let mut rng = path_rng(config.seed, s as u64);
        let start = bounds.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo }).collect();
        climb(&f, bounds, start, config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let best_restart = (0..restarts.len())
        .reduce(|b, k| if restarts[k].value > restarts[b].value { k } else { b })
        .expect("at least one start");
    let params = restarts[best_restart].params.clone();
    let gradient = central_gradient(&params, config.gradient_step, |x| {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(x.to_vec()))
        }
    })?;
    let gradient_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(SearchResult { value: restarts[best_restart].value, params, gradient, gradient_norm, best_restart, restarts })
}
