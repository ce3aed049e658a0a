//! Moduli of continuity and the theoretical error bounds of the operator.
//!
//! Moduli are grid suprema over a uniform lattice of `resolution` points on
//! `[0, 1]`, augmented with the exact step `h = delta`, so the estimate never
//! exceeds the true modulus. With `resolution = 2^m + 1` lattices are nested
//! and refinement can only increase the estimate.
//!
//! Conventions: [`modulus`] takes `delta` and ranges over `0 < h <= delta`.
//! [`second_modulus`] takes the step bound directly, i.e. the already rooted
//! `delta^(1/2)`, and ranges over `0 < h <= step_bound`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::Function;
use crate::moments::delta_n_sq;
use crate::operator::{self, EvalOutcome, PQParams, TruncationPolicy};

pub const DEFAULT_RESOLUTION: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusEstimate {
    pub delta: f64,
    pub value: f64,
    pub resolution: usize,
    pub kind: ModulusKind,
}

/// `f` sampled on the lattice, with prefix maxima of first and second
/// differences per lattice step.
pub struct ModulusLattice<'a> {
    f: &'a Function,
    values: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl<'a> ModulusLattice<'a> {
    pub fn new(f: &'a Function, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Invalid(format!(
                "modulus resolution must be at least 2, got {resolution}"
            )));
        }
        let last = (resolution - 1) as f64;
        let values = (0..resolution)
            .map(|i| f.eval(i as f64 / last))
            .collect::<Result<Vec<_>>>()?;
        let r = resolution;
        let mut first: Vec<f64> = (0..r)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                (0..r - j).fold(0.0_f64, |m, i| m.max((values[i + j] - values[i]).abs()))
            })
            .collect();
        let mut second: Vec<f64> = (0..=(r - 1) / 2)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                (0..r - 2 * j).fold(0.0_f64, |m, i| {
                    m.max((values[i + 2 * j] - 2.0 * values[i + j] + values[i]).abs())
                })
            })
            .collect();
        for table in [&mut first, &mut second] {
            for j in 1..table.len() {
                table[j] = table[j].max(table[j - 1]);
            }
        }
        Ok(Self {
            f,
            values,
            first,
            second,
        })
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    fn steps_within(&self, h: f64) -> usize {
        let last = (self.values.len() - 1) as f64;
        let mut j = (h * last).floor() as usize;
        while j > 0 && j as f64 / last > h {
            j -= 1;
        }
        j
    }

    fn lattice_point(&self, i: usize) -> f64 {
        i as f64 / (self.values.len() - 1) as f64
    }

    /// First-order modulus estimate; see the module docs.
    pub fn first_order(&self, delta: f64) -> Result<ModulusEstimate> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                expected: "(0, 1]",
            });
        }
        let j = self.steps_within(delta).min(self.first.len() - 1);
        let mut value = self.first[j];
        for (i, v) in self.values.iter().enumerate() {
            let x = self.lattice_point(i);
            if x + delta > 1.0 {
                break;
            }
            value = value.max((self.f.eval(x + delta)? - v).abs());
        }
        let tail = self.f.eval(1.0 - delta)?;
        value = value.max((self.values[self.values.len() - 1] - tail).abs());
        Ok(ModulusEstimate {
            delta,
            value,
            resolution: self.resolution(),
            kind: ModulusKind::FirstOrder,
        })
    }

    /// Second-order modulus estimate for steps `0 < h <= step_bound`.
    pub fn second_order(&self, step_bound: f64) -> Result<ModulusEstimate> {
        if !(step_bound > 0.0 && step_bound <= 0.5) {
            return Err(Error::OutOfRange {
                name: "step bound",
                value: step_bound,
                expected: "(0, 1/2]",
            });
        }
        let h = step_bound;
        let j = self.steps_within(h).min(self.second.len() - 1);
        let mut value = self.second[j];
        let diff = |x: f64, v0: f64| -> Result<f64> {
            Ok((self.f.eval(x + 2.0 * h)? - 2.0 * self.f.eval(x + h)? + v0).abs())
        };
        for (i, v) in self.values.iter().enumerate() {
            let x = self.lattice_point(i);
            if x + 2.0 * h > 1.0 {
                break;
            }
            value = value.max(diff(x, *v)?);
        }
        let start = 1.0 - 2.0 * h;
        value = value.max(diff(start, self.f.eval(start)?)?);
        Ok(ModulusEstimate {
            delta: step_bound,
            value,
            resolution: self.resolution(),
            kind: ModulusKind::SecondOrder,
        })
    }
}

/// `omega(f, delta) = sup_{0 < h <= delta} sup_x |f(x + h) - f(x)|`.
pub fn modulus(f: &Function, delta: f64, resolution: usize) -> Result<ModulusEstimate> {
    ModulusLattice::new(f, resolution)?.first_order(delta)
}

/// `omega_2` with steps up to `step_bound`: `sup |f(x + 2h) - 2 f(x + h) + f(x)|`.
pub fn second_modulus(f: &Function, step_bound: f64, resolution: usize) -> Result<ModulusEstimate> {
    ModulusLattice::new(f, resolution)?.second_order(step_bound)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointError {
    pub x: f64,
    pub f_x: f64,
    pub abs_error: f64,
    pub outcome: EvalOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupError {
    pub sup_error: f64,
    pub max_error_bound: f64,
    pub points: Vec<PointError>,
}

impl SupError {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.outcome.converged)
    }
}

/// Empirical `max_x |M(f; x) - f(x)|` over `grid` and the largest certified
/// truncation error, kept separate.
pub fn sup_error(
    params: PQParams,
    f: &Function,
    grid: &[f64],
    policy: &TruncationPolicy,
) -> Result<SupError> {
    let outcomes = operator::evaluate_grid(params, f, grid, policy);
    let mut points = Vec::with_capacity(grid.len());
    for (&x, outcome) in grid.iter().zip(outcomes) {
        let outcome = outcome?;
        let f_x = f.eval(x)?;
        points.push(PointError {
            x,
            f_x,
            abs_error: (outcome.value - f_x).abs(),
            outcome,
        });
    }
    Ok(SupError {
        sup_error: points.iter().fold(0.0, |m, p| m.max(p.abs_error)),
        max_error_bound: points.iter().fold(0.0, |m, p| m.max(p.outcome.error_bound)),
        points,
    })
}

/// `sqrt(p^n / [n+1]_{p,q})`.
pub fn uniform_delta(params: PQParams) -> f64 {
    params.moment_scale().sqrt()
}

/// `2 omega(f, sqrt(p^n / [n+1]_{p,q}))`, uniform in `x`.
pub fn uniform_bound(params: PQParams, f: &Function, resolution: usize) -> Result<f64> {
    Ok(2.0 * modulus(f, uniform_delta(params), resolution)?.value)
}

/// A Lipschitz class `|f(t) - f(x)| <= m |t - x|^alpha`, asserted by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzClass {
    pub m: f64,
    pub alpha: f64,
}

impl LipschitzClass {
    pub fn new(m: f64, alpha: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::OutOfRange {
                name: "M",
                value: m,
                expected: "(0, inf)",
            });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
                expected: "(0, 1]",
            });
        }
        Ok(Self { m, alpha })
    }
}

/// `M delta_n(x)^alpha`, or `None` where `delta_n^2(x) < 0`.
pub fn lipschitz_bound(params: PQParams, class: LipschitzClass, x: f64) -> Option<f64> {
    let d2 = delta_n_sq(params, x);
    if d2 < 0.0 {
        None
    } else {
        Some(class.m * d2.powf(class.alpha / 2.0))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub points: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub x: f64,
    pub value: f64,
    pub f_x: f64,
    pub abs_error: f64,
    pub tail_mass: f64,
    pub terms: usize,
    pub error_bound: f64,
    pub converged: bool,
    pub delta_n_sq: f64,
    pub omega2: Option<f64>,
    pub lipschitz_bound: Option<f64>,
}

/// Empirical error next to the theoretical bounds, for one `(n, p, q)` and `f`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub function: String,
    pub empirical_sup_error: f64,
    pub max_error_bound: f64,
    pub uniform_delta: f64,
    pub uniform_bound: f64,
    pub within_uniform_bound: bool,
    /// `sup_x omega_2(f, delta_n(x))` over points with `delta_n^2(x) >= 0`;
    /// the constant in front of it is unknown, so it is reported raw.
    pub omega2_sup: f64,
    /// `max_x |M(f; x) - f(x)| / omega_2(f, delta_n(x))` where the modulus is positive.
    pub omega2_ratio: Option<f64>,
    pub lipschitz: Option<LipschitzClass>,
    pub lipschitz_bound: Option<f64>,
    pub lipschitz_violations: usize,
    pub negative_delta_points: usize,
    pub resolution: usize,
    pub grid: GridInfo,
    pub rows: Vec<BoundRow>,
}

pub fn bound_report(
    params: PQParams,
    f: &Function,
    grid: &[f64],
    policy: &TruncationPolicy,
    resolution: usize,
    lipschitz: Option<LipschitzClass>,
) -> Result<BoundReport> {
    if grid.is_empty() {
        return Err(Error::Invalid("bound report needs a nonempty grid".into()));
    }
    let empirical = sup_error(params, f, grid, policy)?;
    let lattice = ModulusLattice::new(f, resolution)?;
    let delta = uniform_delta(params);
    let uniform = 2.0 * lattice.first_order(delta)?.value;
    let mut rows = Vec::with_capacity(grid.len());
    let mut omega2_sup = 0.0_f64;
    let mut ratio: Option<f64> = None;
    let mut negative = 0;
    let mut lip_sup: Option<f64> = None;
    let mut lip_violations = 0;
    for pt in &empirical.points {
        let d2 = delta_n_sq(params, pt.x);
        let omega2 = if d2 < 0.0 {
            negative += 1;
            None
        } else if d2 == 0.0 {
            Some(0.0)
        } else {
            Some(lattice.second_order(d2.sqrt().min(0.5))?.value)
        };
        if let Some(w) = omega2 {
            omega2_sup = omega2_sup.max(w);
            if w > 0.0 {
                let r = pt.abs_error / w;
                ratio = Some(ratio.map_or(r, |m: f64| m.max(r)));
            }
        }
        let lip = lipschitz.and_then(|c| lipschitz_bound(params, c, pt.x));
        if let Some(b) = lip {
            lip_sup = Some(lip_sup.map_or(b, |m: f64| m.max(b)));
            if pt.abs_error > b + pt.outcome.error_bound {
                lip_violations += 1;
            }
        }
        rows.push(BoundRow {
            x: pt.x,
            value: pt.outcome.value,
            f_x: pt.f_x,
            abs_error: pt.abs_error,
            tail_mass: pt.outcome.tail_mass,
            terms: pt.outcome.terms_used,
            error_bound: pt.outcome.error_bound,
            converged: pt.outcome.converged,
            delta_n_sq: d2,
            omega2,
            lipschitz_bound: lip,
        });
    }
    let pq = params.pq();
    Ok(BoundReport {
        n: params.n(),
        p: pq.p(),
        q: pq.q(),
        function: f.label().to_string(),
        empirical_sup_error: empirical.sup_error,
        max_error_bound: empirical.max_error_bound,
        uniform_delta: delta,
        uniform_bound: uniform,
        within_uniform_bound: empirical.sup_error <= uniform,
        omega2_sup,
        omega2_ratio: ratio,
        lipschitz,
        lipschitz_bound: lip_sup,
        lipschitz_violations: lip_violations,
        negative_delta_points: negative,
        resolution: lattice.resolution(),
        grid: GridInfo {
            points: grid.len(),
            min: grid.iter().copied().fold(f64::INFINITY, f64::min),
            max: grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        rows,
    })
}
