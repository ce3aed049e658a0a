//! Raw and central moments of the operator, and pointwise diagnostics for
//! the moment inequalities
//!
//! ```text
//! x^2 <= M(t^2; x) <= p^n/[n+1] x + x^2                 (upper, "+x^2" form)
//! x^2 <= M(t^2; x) <= p^n/[n+1] x + p x^2               (upper, "p x^2" form)
//! M((t - x)^2; x) <= p^n/[n+1] x + (p - 1) x^2
//! ```
//!
//! The last bound goes negative for `p < 1` and large enough `x`, while a
//! second central moment never does, so these are reported with their slack
//! and never asserted.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::function::Function;
use crate::operator::{self, uniform_grid, EvalOutcome, PQParams, TruncationPolicy};

/// `M(t^j; x)` with the exact sup bound `|t^j| <= 1`.
pub fn raw_moment(
    params: PQParams,
    j: u32,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<EvalOutcome> {
    let policy = TruncationPolicy {
        f_sup_bound: Some(1.0),
        ..*policy
    };
    operator::evaluate(params, &Function::monomial(j), x, &policy)
}

/// `M(1; x)`, `M(t; x)`, `M(t^2; x)` from one shared weight pass.
pub fn moment_triple(
    params: PQParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<[EvalOutcome; 3]> {
    let policy = TruncationPolicy {
        f_sup_bound: Some(1.0),
        ..*policy
    };
    let fs = [
        Function::monomial(0),
        Function::monomial(1),
        Function::monomial(2),
    ];
    let out = operator::evaluate_many(params, &fs, x, &policy)?;
    Ok([out[0], out[1], out[2]])
}

fn central_from(x: f64, m: &[EvalOutcome; 3]) -> f64 {
    m[2].value - 2.0 * x * m[1].value + x * x * m[0].value
}

/// Certified error of `m2 - 2x m1 + x^2 m0`.
fn central_error(x: f64, m: &[EvalOutcome; 3]) -> f64 {
    m[2].error_bound
        + 2.0 * x * m[1].error_bound
        + x * x * m[0].error_bound
        + 4.0 * f64::EPSILON * (m[2].value.abs() + 2.0 * x * m[1].value.abs() + x * x)
}

/// `M((t - x)^2; x)`.
pub fn central_second_moment(params: PQParams, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    let m = moment_triple(params, x, policy)?;
    Ok(central_from(x, &m))
}

/// `delta_n^2(x) = x^2 (p - 1) + p^n/[n+1]_{p,q} x`, closed form.
pub fn delta_n_sq(params: PQParams, x: f64) -> f64 {
    let p = params.pq().p();
    x * x * (p - 1.0) + params.moment_scale() * x
}

/// Per-point moment diagnostics. Slacks are signed: nonnegative means the
/// inequality holds.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub x: f64,
    pub m0: EvalOutcome,
    pub m1: EvalOutcome,
    pub m2: EvalOutcome,
    pub central2: f64,
    /// Certified error of `central2`.
    pub central2_error: f64,
    /// `|M(t; x) - x|`.
    pub first_moment_defect: f64,
    /// `[m2 - x^2, (scale x + x^2) - m2, central_bound - central2]`.
    pub slack: [f64; 3],
    /// `(scale x + p x^2) - m2`.
    pub upper_alt_slack: f64,
    /// `p^n/[n+1] x + (p - 1) x^2`; may be negative when `p < 1`.
    pub central_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub upper_alt_ok: bool,
    pub central_ok: bool,
    pub tolerance: f64,
}

impl MomentReport {
    pub fn tail_mass_max(&self) -> f64 {
        self.m0
            .tail_mass
            .max(self.m1.tail_mass)
            .max(self.m2.tail_mass)
    }

    pub fn converged(&self) -> bool {
        self.m0.converged && self.m1.converged && self.m2.converged
    }
}

pub fn moment_report(params: PQParams, x: f64, policy: &TruncationPolicy) -> Result<MomentReport> {
    let m = moment_triple(params, x, policy)?;
    let p = params.pq().p();
    let scale = params.moment_scale();
    let central2 = central_from(x, &m);
    let central2_error = central_error(x, &m);
    let m2_tol = m[2].error_bound + 4.0 * f64::EPSILON * m[2].value.abs();
    let tolerance = m[0].error_bound + m[1].error_bound + m[2].error_bound;
    let central_bound = delta_n_sq(params, x);
    let slack = [
        m[2].value - x * x,
        scale * x + x * x - m[2].value,
        central_bound - central2,
    ];
    let upper_alt_slack = scale * x + p * x * x - m[2].value;
    Ok(MomentReport {
        x,
        m0: m[0],
        m1: m[1],
        m2: m[2],
        central2,
        central2_error,
        first_moment_defect: (m[1].value - x).abs(),
        slack,
        upper_alt_slack,
        central_bound,
        lower_ok: slack[0] >= -(m2_tol.max(tolerance)),
        upper_ok: slack[1] >= -(m2_tol.max(tolerance)),
        upper_alt_ok: upper_alt_slack >= -(m2_tol.max(tolerance)),
        central_ok: slack[2] >= -(central2_error.max(tolerance)),
        tolerance,
    })
}

/// [`moment_report`] across `grid`, rows in input order.
pub fn moment_bounds_report(
    params: PQParams,
    grid: &[f64],
    policy: &TruncationPolicy,
) -> Vec<Result<MomentReport>> {
    grid.par_iter()
        .map(|&x| moment_report(params, x, policy))
        .collect()
}

/// 101 points on `[0, 0.99]` followed by the endpoint `x = 1`.
pub fn default_report_grid() -> Vec<f64> {
    let mut g = uniform_grid(101, 0.0, 0.99);
    g.push(1.0);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::PQPair;
    use crate::oracle::{self, rat};

    fn params(n: u32, p: f64, q: f64) -> PQParams {
        PQParams::from_parts(n, p, q).unwrap()
    }

    #[test]
    fn raw_moment_examples() {
        let policy = TruncationPolicy::default();
        let pp = params(3, 0.95, 0.9);
        assert!((raw_moment(pp, 0, 0.5, &policy).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(raw_moment(pp, 1, 0.0, &policy).unwrap().value, 0.0);
        let m1 = raw_moment(params(2, 1.0, 0.9), 1, 0.5, &policy).unwrap();
        assert!((m1.value - 0.5).abs() < 1e-10);
    }

    #[test]
    fn first_moment_against_oracle_bracket() {
        // n = 2, p = 1, q = 9/10, x = 1/2: the exact bracket pins M(t; x).
        let ident = [rat(0, 1), rat(1, 1)];
        let b =
            oracle::exact_polynomial_bracket(2, &rat(1, 1), &rat(9, 10), &rat(1, 2), &ident, 64)
                .unwrap();
        let m1 = raw_moment(params(2, 1.0, 0.9), 1, 0.5, &TruncationPolicy::default()).unwrap();
        let v = oracle::from_f64(m1.value);
        let eb = oracle::from_f64(m1.error_bound);
        assert!(&b.lower - &eb <= v && v <= &b.upper + &eb);
    }

    #[test]
    fn central_moment_examples() {
        let policy = TruncationPolicy::default();
        let pp = params(3, 1.0, 0.9);
        assert_eq!(central_second_moment(pp, 0.0, &policy).unwrap(), 0.0);
        assert_eq!(central_second_moment(pp, 1.0, &policy).unwrap(), 0.0);
        let c = central_second_moment(pp, 0.5, &policy).unwrap();
        assert!((0.0..=0.5 / 3.439 + 1e-12).contains(&c), "{c}");
    }

    #[test]
    fn central_moment_oracle_value() {
        // Exact second central moment bracket for n = 3, p = 1, q = 9/10, x = 1/2.
        let x = rat(1, 2);
        let coeffs = [&x * &x, rat(-1, 1), rat(1, 1)];
        let b =
            oracle::exact_polynomial_bracket(3, &rat(1, 1), &rat(9, 10), &x, &coeffs, 64).unwrap();
        let c =
            central_second_moment(params(3, 1.0, 0.9), 0.5, &TruncationPolicy::default()).unwrap();
        let lo = oracle::to_f64(&b.lower);
        let hi = oracle::to_f64(&b.upper);
        assert!(c >= lo - 1e-12 && c <= hi + 1e-12, "{lo} {c} {hi}");
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_n_sq(params(3, 1.0, 0.9), 0.0), 0.0);
        assert!((delta_n_sq(params(3, 1.0, 0.9), 1.0) - 1.0 / 3.439).abs() < 1e-14);
        assert!((delta_n_sq(params(1, 0.9, 0.8), 1.0) - (0.9 / 1.7 - 0.1)).abs() < 1e-14);
    }

    #[test]
    fn single_pass_matches_separate_evaluations() {
        let policy = TruncationPolicy::default();
        let pp = params(4, 0.9, 0.8);
        for x in [0.1, 0.5, 0.9] {
            let m = moment_triple(pp, x, &policy).unwrap();
            for j in 0..3 {
                let single = raw_moment(pp, j, x, &policy).unwrap();
                assert!((single.value - m[j as usize].value).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn report_at_p_one_passes() {
        let policy = TruncationPolicy::default();
        let grid = uniform_grid(11, 0.0, 1.0);
        for r in moment_bounds_report(params(3, 1.0, 0.9), &grid, &policy) {
            let r = r.unwrap();
            assert!(r.lower_ok && r.upper_ok && r.central_ok, "{r:?}");
        }
        let zero = moment_report(params(3, 1.0, 0.9), 0.0, &policy).unwrap();
        assert_eq!(zero.slack, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_central_bound_is_reported() {
        let r = moment_report(params(5, 0.9, 0.8), 0.9, &TruncationPolicy::default()).unwrap();
        let pp = params(5, 0.9, 0.8);
        let expect = pp.moment_scale() * 0.9 + (0.9 - 1.0) * 0.81;
        assert!((r.central_bound - expect).abs() < 1e-15);
        assert!(r.central2 >= -r.central2_error);
        if r.central_bound < 0.0 {
            assert!(!r.central_ok);
        }
    }

    #[test]
    fn classical_moments() {
        // Classical MKZ: M(t^2; x) - x^2 is O(x(1-x)^2/n), M(t; x) = x.
        let pp = PQParams::new(5, PQPair::classical()).unwrap();
        let r = moment_report(pp, 0.4, &TruncationPolicy::default()).unwrap();
        assert!(r.first_moment_defect < 1e-12);
        assert!(r.lower_ok && r.upper_ok);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_report_grid();
        assert_eq!(g.len(), 102);
        assert_eq!(g[100], 0.99);
        assert_eq!(g[101], 1.0);
    }
}
