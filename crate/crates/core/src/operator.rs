//! Evaluation of the (p,q)-Meyer-Koenig-Zeller operator
//!
//! ```text
//! M_{n,p,q}(f; x) = sum_k w_k(x) f(p^n [k] / [n+k]),   x in [0, 1)
//! M_{n,p,q}(f; 1) = f(1)
//! ```
//!
//! with weights `w_k(x) = [n+k k] x^k p^(-kn) prod_{s=0..n}(p^s - q^s x) / p^(n(n+1)/2)`.
//! In tau form the weights are `[n+k k]_tau x^k prod_{s=0..n}(1 - tau^s x)` and
//! the nodes are `[k]_tau / [n+k]_tau`; the large powers of `p` cancel and
//! never appear. The weights sum to exactly 1, so `1 - sum_{k<=K} w_k` is a
//! rigorous bound on the mass left out by truncation.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::PQPair;
use crate::error::{Error, Result};
use crate::function::Function;

/// Resolution of the grid used to estimate `sup |f|` when no bound is known.
pub const HEURISTIC_SUP_POINTS: usize = 1025;
/// Multiplier applied to the grid estimate of `sup |f|`.
pub const HEURISTIC_SUP_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PQParams {
    n: u32,
    pq: PQPair,
}

impl PQParams {
    pub fn new(n: u32, pq: PQPair) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDegree(n));
        }
        Ok(Self { n, pq })
    }

    /// Shorthand for `PQParams::new(n, PQPair::new(p, q)?)`.
    pub fn from_parts(n: u32, p: f64, q: f64) -> Result<Self> {
        Self::new(n, PQPair::new(p, q)?)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn pq(&self) -> PQPair {
        self.pq
    }

    /// `p^n / [n+1]_{p,q}`, which equals `1 / [n+1]_tau`.
    pub fn moment_scale(&self) -> f64 {
        1.0 / self.pq.tau_int(self.n as u64 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub tail_tol: f64,
    pub k_max: usize,
    pub f_sup_bound: Option<f64>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            k_max: 100_000,
            f_sup_bound: None,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tail_tol: f64, k_max: usize) -> Result<Self> {
        let policy = Self {
            tail_tol,
            k_max,
            f_sup_bound: None,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Result<Self> {
        self.f_sup_bound = Some(bound);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "tail_tol must be positive, got {}",
                self.tail_tol
            )));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidPolicy("k_max must be at least 1".into()));
        }
        if let Some(b) = self.f_sup_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidPolicy(format!(
                    "sup bound must be a finite nonnegative number, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// A truncated operator value together with its certificate.
///
/// `error_bound = tail_bound + rounding_bound`, where `tail_bound` is
/// `tail_mass` times the sup bound on `|f|` and `rounding_bound` is an
/// a priori bound on floating-point error in the weight recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalOutcome {
    pub value: f64,
    pub tail_mass: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub rounding_bound: f64,
    pub error_bound: f64,
    pub converged: bool,
    /// The sup bound came from grid sampling rather than the caller.
    pub heuristic_bound: bool,
}

impl EvalOutcome {
    fn endpoint(value: f64) -> Self {
        Self {
            value,
            tail_mass: 0.0,
            terms_used: 0,
            tail_bound: 0.0,
            rounding_bound: 0.0,
            error_bound: 0.0,
            converged: true,
            heuristic_bound: false,
        }
    }
}

fn check_unit_interval(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "[0, 1]",
        })
    }
}

fn check_half_open(x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "[0, 1)",
        })
    }
}

/// The node `p^n [k] / [n+k]`, computed as `(1 - tau^k)/(1 - tau^(n+k))`.
pub fn node(params: PQParams, k: u64) -> f64 {
    let pq = params.pq;
    pq.tau_int(k) / pq.tau_int(params.n as u64 + k)
}

/// `1 - tau^s x` without cancellation near `tau^s x = 1`.
fn factor(pq: PQPair, s: u64, x: f64) -> f64 {
    if pq.is_classical() {
        1.0 - x
    } else {
        pq.one_minus_tau_pow(s) + pq.tau_pow(s) * (1.0 - x)
    }
}

/// The k-th weight computed independently of the recurrence, in log space.
pub fn weight(params: PQParams, k: u64, x: f64) -> Result<f64> {
    check_half_open(x)?;
    let pq = params.pq;
    let n = params.n as u64;
    let ln_w0: f64 = (0..=n).map(|s| factor(pq, s, x).ln()).sum();
    if k == 0 {
        return Ok(ln_w0.exp());
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let ln_binom: f64 = (1..=k)
        .map(|j| pq.tau_int(n + j).ln() - pq.tau_int(j).ln())
        .sum();
    Ok((ln_w0 + ln_binom + k as f64 * x.ln()).exp())
}

const RESCALE_BITS: i32 = 512;

/// Weight recurrence `w_{k+1} = w_k * x [n+k+1]_tau / [k+1]_tau`, carrying a
/// binary exponent so that `w_0` may sit far below the smallest double.
#[derive(Debug, Clone)]
struct Terms {
    pq: PQPair,
    n: u64,
    x: f64,
    k: u64,
    mantissa: f64,
    exp2: i32,
    low: f64,
    high: f64,
}

impl Terms {
    fn new(params: PQParams, x: f64) -> Self {
        let pq = params.pq;
        let n = params.n as u64;
        let scale_down = 2f64.powi(-RESCALE_BITS);
        let mut mantissa = 1.0_f64;
        let mut exp2 = 0_i32;
        for s in 0..=n {
            mantissa *= factor(pq, s, x);
            if mantissa != 0.0 && mantissa < scale_down {
                mantissa *= 2f64.powi(RESCALE_BITS);
                exp2 -= RESCALE_BITS;
            }
        }
        Self {
            pq,
            n,
            x,
            k: 0,
            mantissa,
            exp2,
            low: 0.0,
            high: pq.tau_int(n),
        }
    }

    fn weight(&self) -> f64 {
        if self.exp2 == 0 {
            self.mantissa
        } else {
            self.mantissa * 2f64.powi(self.exp2)
        }
    }

    fn advance(&mut self) {
        let a = self.pq.tau_int(self.k + 1);
        let b = self.pq.tau_int(self.n + self.k + 1);
        self.mantissa *= self.x * (b / a);
        if self.exp2 < 0 && self.mantissa > 2f64.powi(RESCALE_BITS) {
            self.mantissa *= 2f64.powi(-RESCALE_BITS);
            self.exp2 += RESCALE_BITS;
        }
        self.k += 1;
        self.low = a;
        self.high = b;
    }
}

impl Iterator for Terms {
    /// `(node_k, w_k)`.
    type Item = (f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let out = (self.low / self.high, self.weight());
        self.advance();
        Some(out)
    }
}

/// The infinite sequence `w_0(x), w_1(x), ...` produced by the ratio recurrence.
#[derive(Debug, Clone)]
pub struct WeightStream(Terms);

impl Iterator for WeightStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.0.next().map(|(_, w)| w)
    }
}

pub fn weight_stream(params: PQParams, x: f64) -> Result<WeightStream> {
    check_half_open(x)?;
    Ok(WeightStream(Terms::new(params, x)))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// A priori relative rounding of the weight recurrence: about nine unit
/// roundoffs per step plus the `n + 1` factors of `w_0`.
fn rounding_factor(terms: usize, n: u32) -> f64 {
    f64::EPSILON * (5.0 * terms as f64 + 2.0 * n as f64 + 16.0)
}

/// `M_{n,p,q}(f; x)` for several functions at once, sharing one weight pass.
pub fn evaluate_many(
    params: PQParams,
    fs: &[Function],
    x: f64,
    policy: &TruncationPolicy,
) -> Result<Vec<EvalOutcome>> {
    check_unit_interval(x)?;
    policy.validate()?;
    if x == 1.0 {
        return fs
            .iter()
            .map(|f| f.eval(1.0).map(EvalOutcome::endpoint))
            .collect();
    }
    let mut mass = CompensatedSum::default();
    let mut acc = vec![CompensatedSum::default(); fs.len()];
    let mut abs_acc = vec![0.0_f64; fs.len()];
    let mut terms_used = 0;
    for (node_k, w) in Terms::new(params, x).take(policy.k_max) {
        mass.add(w);
        for ((f, a), b) in fs.iter().zip(acc.iter_mut()).zip(abs_acc.iter_mut()) {
            let contribution = w * f.eval(node_k)?;
            a.add(contribution);
            *b += contribution.abs();
        }
        terms_used += 1;
        if 1.0 - mass.value() <= policy.tail_tol {
            break;
        }
    }
    let tail_mass = (1.0 - mass.value()).max(0.0);
    let converged = tail_mass <= policy.tail_tol;
    let rounding = rounding_factor(terms_used, params.n);
    fs.iter()
        .zip(acc)
        .zip(abs_acc)
        .map(|((f, a), abs_sum)| {
            let (sup, heuristic) = if tail_mass == 0.0 {
                (0.0, false)
            } else {
                effective_sup(f, policy)
            };
            let tail_bound = tail_mass * sup;
            let rounding_bound = rounding * abs_sum;
            Ok(EvalOutcome {
                value: a.value(),
                tail_mass,
                terms_used,
                tail_bound,
                rounding_bound,
                error_bound: tail_bound + rounding_bound,
                converged,
                heuristic_bound: heuristic,
            })
        })
        .collect()
}

/// Bound on `sup |f|`: the caller's bound, then the function's own hint, then
/// twice the maximum over a 1025-point grid (flagged as heuristic).
pub fn effective_sup(f: &Function, policy: &TruncationPolicy) -> (f64, bool) {
    if let Some(b) = policy.f_sup_bound {
        (b, false)
    } else if let Some(h) = f.sup_hint() {
        (h, false)
    } else {
        (
            HEURISTIC_SUP_SAFETY * f.grid_sup(HEURISTIC_SUP_POINTS),
            true,
        )
    }
}

/// `M_{n,p,q}(f; x)` truncated according to `policy`.
pub fn evaluate(
    params: PQParams,
    f: &Function,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalOutcome> {
    let mut out = evaluate_many(params, std::slice::from_ref(f), x, policy)?;
    Ok(out.remove(0))
}

/// Pointwise [`evaluate`] over `grid`, in input order. Points are evaluated in
/// parallel; each point's result is independent of scheduling.
pub fn evaluate_grid(
    params: PQParams,
    f: &Function,
    grid: &[f64],
    policy: &TruncationPolicy,
) -> Vec<Result<EvalOutcome>> {
    grid.par_iter()
        .map(|&x| evaluate(params, f, x, policy))
        .collect()
}

/// `|sum_{k<=K} w_k(x) - 1|` with `K` chosen by `policy`.
pub fn normalization_defect(params: PQParams, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    check_half_open(x)?;
    policy.validate()?;
    let mut mass = CompensatedSum::default();
    for w in weight_stream(params, x)?.take(policy.k_max) {
        mass.add(w);
        if 1.0 - mass.value() <= policy.tail_tol {
            break;
        }
    }
    Ok((1.0 - mass.value()).abs())
}

/// `S_K(x) = sum_{k=0..K} w_k(x)`.
pub fn partial_sum(params: PQParams, x: f64, last_k: usize) -> Result<f64> {
    let mut mass = CompensatedSum::default();
    for w in weight_stream(params, x)?.take(last_k + 1) {
        mass.add(w);
    }
    Ok(mass.value())
}

/// Uniform grid of `points` nodes on `[lo, hi]`; endpoints are exact.
pub fn uniform_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = points - 1;
            (0..points)
                .map(|i| {
                    if i == last {
                        hi
                    } else {
                        lo + (hi - lo) * (i as f64 / last as f64)
                    }
                })
                .collect()
        }
    }
}
