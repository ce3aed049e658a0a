//! Parameter sequences `n -> (p_n, q_n)`, asymptotic density estimates and
//! the statistical Korovkin witness.
//!
//! Statistical limits are asymptotic, so they are witnessed by finite density
//! tables: for each `N` in a list, the fraction of `n <= N` whose sup error
//! reaches `epsilon`. A nonincreasing table is the checkable surrogate for
//! density zero.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::PQPair;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::function::Function;
use crate::moments::delta_n_sq;
use crate::operator::{self, uniform_grid, PQParams, TruncationPolicy};

/// Indices sampled when a scheme is constructed.
pub const SCHEME_CHECK_LIMIT: u32 = 10_000;

pub const DEFAULT_NS: [usize; 4] = [50, 100, 200, 400];

type Rule = dyn Fn(u32) -> Result<(f64, f64)> + Send + Sync;

#[derive(Clone)]
pub struct SequenceScheme {
    name: String,
    start: u32,
    rule: Arc<Rule>,
}

impl fmt::Debug for SequenceScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequenceScheme")
            .field("name", &self.name)
            .field("start", &self.start)
            .finish()
    }
}

impl SequenceScheme {
    /// Builds a scheme defined for `n >= start`, rejecting it unless
    /// `0 < q_n < p_n <= 1` for every `n` in `start..=10^4`.
    pub fn new<F>(name: impl Into<String>, start: u32, rule: F) -> Result<Self>
    where
        F: Fn(u32) -> Result<(f64, f64)> + Send + Sync + 'static,
    {
        let name = name.into();
        if start == 0 {
            return Err(Error::InvalidScheme {
                name,
                reason: "indices start at 1".into(),
            });
        }
        let scheme = Self {
            name,
            start,
            rule: Arc::new(rule),
        };
        for n in start..=SCHEME_CHECK_LIMIT {
            if let Err(e) = scheme.pair(n) {
                return Err(Error::InvalidScheme {
                    name: scheme.name,
                    reason: format!("n = {n}: {e}"),
                });
            }
        }
        Ok(scheme)
    }

    /// `q_n = 1 - 1/n`, `p_n = e^{1/(2n)} (1 - 1/n)`, from `n = 2`.
    pub fn reference() -> Self {
        Self::new("paper", 2, |n| {
            let q = 1.0 - 1.0 / n as f64;
            Ok(((0.5 / n as f64).exp() * q, q))
        })
        .expect("reference scheme is valid")
    }

    pub fn constant(p: f64, q: f64) -> Result<Self> {
        PQPair::new(p, q)?;
        Self::new(format!("constant({p},{q})"), 1, move |_| Ok((p, q)))
    }

    /// Scheme from two expressions in `n`. It starts at the first `n <= 100`
    /// where both are defined and admissible.
    pub fn from_expressions(p_text: &str, q_text: &str) -> Result<Self> {
        let p = Expression::parse_in(p_text, "n")?;
        let q = Expression::parse_in(q_text, "n")?;
        let name = format!("p={p};q={q}");
        let rule = move |n: u32| -> Result<(f64, f64)> {
            let v = n as f64;
            Ok((p.eval(v)?, q.eval(v)?))
        };
        let start = (1..=100)
            .find(|&n| rule(n).and_then(|(p, q)| PQPair::new(p, q)).is_ok())
            .ok_or_else(|| Error::InvalidScheme {
                name: name.clone(),
                reason: "no admissible index in 1..=100".into(),
            })?;
        Self::new(name, start, rule)
    }

    /// Resolves `paper`, `P,Q` with two expressions in `n`, or fails.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "paper" {
            return Ok(Self::reference());
        }
        match text.split_once(',') {
            Some((p, q)) => Self::from_expressions(p, q),
            None => Err(Error::InvalidScheme {
                name: text.to_string(),
                reason: "expected `paper` or two expressions in n separated by a comma".into(),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn pair(&self, n: u32) -> Result<PQPair> {
        if n < self.start {
            return Err(Error::InvalidScheme {
                name: self.name.clone(),
                reason: format!("defined from n = {}, asked for n = {n}", self.start),
            });
        }
        let (p, q) = (self.rule)(n)?;
        PQPair::new(p, q)
    }

    pub fn params(&self, n: u32) -> Result<PQParams> {
        PQParams::new(n, self.pair(n)?)
    }
}

/// `|{k <= N : indicator(k)}| / N`.
pub fn density(indicator: impl Fn(usize) -> bool, big_n: usize) -> Result<f64> {
    if big_n == 0 {
        return Err(Error::OutOfRange {
            name: "N",
            value: 0.0,
            expected: ">= 1",
        });
    }
    Ok((1..=big_n).filter(|&k| indicator(k)).count() as f64 / big_n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub function: String,
    pub epsilon: f64,
    pub ns: Vec<usize>,
    pub densities: Vec<f64>,
    pub member_counts: Vec<usize>,
    /// Indices `n <= N` left out: below the scheme's start or failed to evaluate.
    pub excluded: Vec<usize>,
}

impl DensityReport {
    pub fn is_nonincreasing(&self) -> bool {
        self.densities.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Sup errors `e_n` per index, `None` where excluded.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorSequence {
    pub function: String,
    pub errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KorovkinReport {
    pub scheme: String,
    pub epsilon: f64,
    pub grid_points: usize,
    pub reports: Vec<DensityReport>,
    pub sequences: Vec<ErrorSequence>,
}

/// 33 points on `[0, 0.96]`, the sup-norm grid for `e_n`.
pub fn korovkin_grid() -> Vec<f64> {
    uniform_grid(33, 0.0, 0.96)
}

/// Densities of `{n <= N : e_n >= epsilon}` from one ordered pass; index `n`
/// lives at `errors[n - 1]`.
fn tabulate(function: &str, errors: &[Option<f64>], epsilon: f64, ns: &[usize]) -> DensityReport {
    let mut member_counts = Vec::with_capacity(ns.len());
    let mut excluded = Vec::with_capacity(ns.len());
    let (mut members, mut skipped, mut seen) = (0, 0, 0);
    for &big_n in ns {
        for e in &errors[seen..big_n] {
            match e {
                Some(v) if *v >= epsilon => members += 1,
                Some(_) => {}
                None => skipped += 1,
            }
        }
        seen = big_n;
        member_counts.push(members);
        excluded.push(skipped);
    }
    DensityReport {
        function: function.to_string(),
        epsilon,
        ns: ns.to_vec(),
        densities: member_counts
            .iter()
            .zip(ns)
            .map(|(&c, &n)| c as f64 / n as f64)
            .collect(),
        member_counts,
        excluded,
    }
}

/// Statistical Korovkin witness for `1, t, t^2` and `f` along `scheme`.
pub fn st_korovkin_check(
    scheme: &SequenceScheme,
    f: &Function,
    epsilon: f64,
    ns: &[usize],
    grid: &[f64],
    policy: &TruncationPolicy,
) -> Result<KorovkinReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            expected: "(0, inf)",
        });
    }
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(
            "Ns must be a nonempty increasing list of positive integers".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::Invalid(
            "Korovkin check needs a nonempty grid".into(),
        ));
    }
    policy.validate()?;
    let fs = [
        Function::monomial(0),
        Function::monomial(1),
        Function::monomial(2),
        f.clone(),
    ];
    let big_n = *ns.last().unwrap();
    let per_index: Vec<Option<[f64; 4]>> = (1..=big_n)
        .into_par_iter()
        .map(|n| sup_errors(scheme, n as u32, &fs, grid, policy))
        .collect();
    let mut sequences = Vec::with_capacity(fs.len());
    let mut reports = Vec::with_capacity(fs.len());
    for (i, g) in fs.iter().enumerate() {
        let errors: Vec<Option<f64>> = per_index.iter().map(|e| e.map(|e| e[i])).collect();
        reports.push(tabulate(g.label(), &errors, epsilon, ns));
        sequences.push(ErrorSequence {
            function: g.label().to_string(),
            errors,
        });
    }
    Ok(KorovkinReport {
        scheme: scheme.name().to_string(),
        epsilon,
        grid_points: grid.len(),
        reports,
        sequences,
    })
}

/// `e_n` for each function; `None` if the index is outside the scheme or any
/// point fails or does not converge.
fn sup_errors(
    scheme: &SequenceScheme,
    n: u32,
    fs: &[Function; 4],
    grid: &[f64],
    policy: &TruncationPolicy,
) -> Option<[f64; 4]> {
    let params = scheme.params(n).ok()?;
    let mut sup = [0.0_f64; 4];
    for &x in grid {
        let out = operator::evaluate_many(params, fs, x, policy).ok()?;
        for (i, (o, g)) in out.iter().zip(fs).enumerate() {
            if !o.converged {
                return None;
            }
            sup[i] = sup[i].max((o.value - g.eval(x).ok()?).abs());
        }
    }
    Some(sup)
}

/// `sup_{|t - x| <= delta} |f(t) - f(x)|` by direct pair enumeration over the
/// lattice of `resolution` points, plus pairs at exact distance `delta`.
pub fn tilde_modulus(f: &Function, delta: f64, resolution: usize) -> Result<f64> {
    let values = sample(f, resolution)?;
    tilde_on(f, &values, delta)
}

fn sample(f: &Function, resolution: usize) -> Result<Vec<f64>> {
    if resolution < 2 {
        return Err(Error::Invalid(format!(
            "modulus resolution must be at least 2, got {resolution}"
        )));
    }
    let last = (resolution - 1) as f64;
    (0..resolution).map(|i| f.eval(i as f64 / last)).collect()
}

fn tilde_on(f: &Function, values: &[f64], delta: f64) -> Result<f64> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "[0, inf)",
        });
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let delta = delta.min(1.0);
    let last = (values.len() - 1) as f64;
    let mut best = 0.0_f64;
    for (i, &a) in values.iter().enumerate() {
        let x = i as f64 / last;
        for (j, &b) in values.iter().enumerate().skip(i + 1) {
            if j as f64 / last - x > delta {
                break;
            }
            best = best.max((b - a).abs());
        }
        if x + delta <= 1.0 {
            best = best.max((f.eval(x + delta)? - a).abs());
        }
    }
    best = best.max((values[values.len() - 1] - f.eval(1.0 - delta)?).abs());
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateBound {
    pub n: u32,
    pub bound: f64,
    /// Largest `delta_n(x)` over the usable points.
    pub max_delta_sq: f64,
    /// Grid points with `delta_n(x) < 0`, left out of the supremum.
    pub negative_points: usize,
}

/// `sup_x 2 W(f, sqrt(delta_n(x)))` along `scheme` at index `n`.
pub fn stat_rate_bound(
    scheme: &SequenceScheme,
    n: u32,
    f: &Function,
    grid: &[f64],
    resolution: usize,
) -> Result<RateBound> {
    let params = scheme.params(n)?;
    let values = sample(f, resolution)?;
    let mut bound = 0.0_f64;
    let mut max_delta_sq = 0.0_f64;
    let mut negative = 0;
    for &x in grid {
        let d2 = delta_n_sq(params, x);
        if d2 < 0.0 {
            negative += 1;
            continue;
        }
        max_delta_sq = max_delta_sq.max(d2);
        bound = bound.max(2.0 * tilde_on(f, &values, d2.sqrt())?);
    }
    if negative == grid.len() {
        return Err(Error::Invalid(format!(
            "delta_n(x) is negative at every grid point for n = {n}"
        )));
    }
    Ok(RateBound {
        n,
        bound,
        max_delta_sq,
        negative_points: negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::ModulusLattice;
    use crate::calculus::pq_int;

    #[test]
    fn reference_scheme_limits() {
        let s = SequenceScheme::reference();
        assert_eq!(s.start(), 2);
        assert!(s.pair(1).is_err());
        let pq = s.pair(1000).unwrap();
        assert!((pq.q().powi(1000) - (-1.0_f64).exp()).abs() < 1e-3);
        assert!((pq.p().powi(1000) - (-0.5_f64).exp()).abs() < 1e-3);
        for n in 200..=2000 {
            assert!(1.0 / pq_int(n as u64, s.pair(n).unwrap()) < 0.05);
        }
    }

    #[test]
    fn scheme_validation() {
        assert!(SequenceScheme::constant(1.0, 0.5).is_ok());
        assert!(SequenceScheme::constant(0.5, 0.5).is_err());
        let bad = SequenceScheme::new("bad", 1, |n| Ok((1.0, if n == 500 { 1.0 } else { 0.5 })));
        assert!(matches!(bad, Err(Error::InvalidScheme { .. })));
        let e = SequenceScheme::from_expressions("exp(1/(2*n))*(1-1/n)", "1-1/n").unwrap();
        assert_eq!(e.start(), 2);
        let p = SequenceScheme::reference();
        for n in [2, 17, 999] {
            assert!((e.pair(n).unwrap().p() - p.pair(n).unwrap().p()).abs() < 1e-15);
        }
        assert!(SequenceScheme::parse("paper").is_ok());
        assert!(SequenceScheme::parse("1, 0.5").is_ok());
        assert!(SequenceScheme::parse("nonsense").is_err());
        assert!(SequenceScheme::parse("1, 2").is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(|k| k % 2 == 0, 1000).unwrap(), 0.5);
        assert_eq!(
            density(|k| (k as f64).sqrt().fract() == 0.0, 10_000).unwrap(),
            0.01
        );
        assert_eq!(density(|_| false, 37).unwrap(), 0.0);
        for m in [1, 5, 40] {
            assert_eq!(density(|k| k <= m, 200).unwrap(), m as f64 / 200.0);
        }
        assert!(density(|_| true, 0).is_err());
    }

    #[test]
    fn incremental_tabulation_matches_scratch() {
        let errors: Vec<Option<f64>> = (1..=400)
            .map(|n| {
                if n % 7 == 0 {
                    None
                } else {
                    Some(1.0 / (n as f64).sqrt())
                }
            })
            .collect();
        let ns = [50, 100, 200, 400];
        let r = tabulate("g", &errors, 0.08, &ns);
        for (i, &big_n) in ns.iter().enumerate() {
            let d = density(|k| matches!(errors[k - 1], Some(v) if v >= 0.08), big_n).unwrap();
            assert_eq!(r.densities[i], d);
            assert_eq!(r.member_counts[i] as f64 / big_n as f64, r.densities[i]);
            assert_eq!(r.excluded[i], big_n / 7);
        }
    }

    #[test]
    fn korovkin_reference_scheme() {
        let r = st_korovkin_check(
            &SequenceScheme::reference(),
            &Function::cubic(),
            0.2,
            &[50, 100, 200],
            &korovkin_grid(),
            &TruncationPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.reports.len(), 4);
        for rep in &r.reports {
            assert!(rep.is_nonincreasing(), "{rep:?}");
            assert_eq!(rep.excluded, vec![1, 1, 1]);
        }
        assert_eq!(r.reports[0].densities, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn korovkin_constant_scheme_does_not_converge() {
        let r = st_korovkin_check(
            &SequenceScheme::constant(1.0, 0.5).unwrap(),
            &Function::one(),
            0.01,
            &[20, 40],
            &korovkin_grid(),
            &TruncationPolicy::default(),
        )
        .unwrap();
        let sq = &r.reports[2];
        assert!(sq.densities.iter().all(|&d| d > 0.5), "{sq:?}");
    }

    #[test]
    fn korovkin_input_checks() {
        let s = SequenceScheme::reference();
        let f = Function::one();
        let g = korovkin_grid();
        let pol = TruncationPolicy::default();
        assert!(st_korovkin_check(&s, &f, 0.0, &[10], &g, &pol).is_err());
        assert!(st_korovkin_check(&s, &f, 0.1, &[20, 10], &g, &pol).is_err());
        assert!(st_korovkin_check(&s, &f, 0.1, &[], &g, &pol).is_err());
    }

    #[test]
    fn tilde_matches_usual_modulus() {
        let fs = [
            Function::identity(),
            Function::cubic(),
            Function::abs_centered(),
            Function::new("w", |t| (11.0 * t).sin()),
        ];
        for f in &fs {
            let lattice = ModulusLattice::new(f, 257).unwrap();
            for d in [0.003, 0.05, 0.1234, 0.5, 1.0] {
                let a = tilde_modulus(f, d, 257).unwrap();
                let b = lattice.first_order(d).unwrap().value;
                assert!((a - b).abs() < 1e-13, "{} {d}: {a} {b}", f.label());
            }
        }
    }

    #[test]
    fn rate_bound_examples() {
        let s = SequenceScheme::reference();
        let grid = korovkin_grid();
        let c = Function::new("c", |_| 3.0);
        assert_eq!(stat_rate_bound(&s, 10, &c, &grid, 257).unwrap().bound, 0.0);
        let r = stat_rate_bound(&s, 10, &Function::identity(), &grid, 1025).unwrap();
        let pp = s.params(10).unwrap();
        let max_d = grid.iter().map(|&x| delta_n_sq(pp, x)).fold(0.0, f64::max);
        assert!((r.bound - 2.0 * max_d.sqrt()).abs() < 1e-13);
        let mut prev = f64::INFINITY;
        for n in (2..=200).step_by(9) {
            let b = stat_rate_bound(&s, n, &Function::identity(), &grid, 129)
                .unwrap()
                .bound;
            assert!(b < prev, "n={n}");
            prev = b;
        }
    }
}
