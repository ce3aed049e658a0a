//! Exact rational reference implementation, for testing the floating path.
//!
//! Everything is computed straight from the (p,q) definitions with
//! `[m]_{p,q} = sum_{i<m} p^(m-1-i) q^i`. None of the tau reformulation used by
//! the floating-point code appears here. Sizes are capped because rational
//! growth is superlinear.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub const MAX_DEGREE: u32 = 8;
pub const MAX_TERMS: u32 = 64;
pub const MAX_POLY_DEGREE: usize = 6;

/// `lower <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBracket {
    pub lower: Rational,
    pub upper: Rational,
}

impl ExactBracket {
    pub fn contains(&self, v: &Rational) -> bool {
        &self.lower <= v && v <= &self.upper
    }

    pub fn width(&self) -> Rational {
        &self.upper - &self.lower
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact value of a finite double.
pub fn from_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("finite value")
}

pub fn to_f64(r: &Rational) -> f64 {
    // Scale into a range where both parts convert without overflow.
    use num_traits::ToPrimitive;
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() && d != 0.0 => n / d,
        _ => {
            let bits = r.denom().bits().max(r.numer().bits()) as i64 - 900;
            let shift = bits.max(0) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

fn pow(base: &Rational, e: u32) -> Rational {
    num_traits::pow(base.clone(), e as usize)
}

/// Admissible exact pair: `0 < q < p <= 1`, or `p = q = 1`.
fn check_pair(p: &Rational, q: &Rational) -> Result<()> {
    let one = Rational::one();
    let classical = p == &one && q == &one;
    if classical || (q.is_positive() && q < p && p <= &one) {
        Ok(())
    } else {
        Err(Error::InvalidPair {
            p: to_f64(p),
            q: to_f64(q),
        })
    }
}

fn check_x(x: &Rational) -> Result<()> {
    if !x.is_negative() && x < &Rational::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "x",
            value: to_f64(x),
            expected: "[0, 1)",
        })
    }
}

fn check_caps(n: u32, k: u32) -> Result<()> {
    if n > MAX_DEGREE {
        return Err(Error::OracleCap(format!("n = {n} > {MAX_DEGREE}")));
    }
    if k > MAX_TERMS {
        return Err(Error::OracleCap(format!("k = {k} > {MAX_TERMS}")));
    }
    Ok(())
}

/// `[m]_{p,q}` as the homogeneous sum `p^(m-1) + p^(m-2) q + ... + q^(m-1)`.
pub fn exact_pq_int(m: u32, p: &Rational, q: &Rational) -> Rational {
    (0..m).fold(Rational::zero(), |acc, i| {
        acc + pow(p, m - 1 - i) * pow(q, i)
    })
}

pub fn exact_pq_factorial(m: u32, p: &Rational, q: &Rational) -> Rational {
    (1..=m).fold(Rational::one(), |acc, j| acc * exact_pq_int(j, p, q))
}

/// `[m]! / ([k]! [m-k]!)`.
pub fn exact_pq_binomial(m: u32, k: u32, p: &Rational, q: &Rational) -> Result<Rational> {
    if k > m {
        return Err(Error::BinomialIndex {
            n: m as u64,
            k: k as u64,
        });
    }
    Ok(exact_pq_factorial(m, p, q)
        / (exact_pq_factorial(k, p, q) * exact_pq_factorial(m - k, p, q)))
}

/// Exact residuals of both Pascal-type recurrences.
pub fn exact_pascal_residuals(
    m: u32,
    k: u32,
    p: &Rational,
    q: &Rational,
) -> Result<(Rational, Rational)> {
    if k == 0 || k >= m {
        return Err(Error::PascalIndex {
            n: m as u64,
            k: k as u64,
        });
    }
    let whole = exact_pq_binomial(m, k, p, q)?;
    let left = exact_pq_binomial(m - 1, k - 1, p, q)?;
    let right = exact_pq_binomial(m - 1, k, p, q)?;
    let first = &whole - pow(q, m - k) * &left - pow(p, k) * &right;
    let second = &whole - pow(p, m - k) * &left - pow(q, k) * &right;
    Ok((first.abs(), second.abs()))
}

/// `prod_{s=0..m-1} (p^s - q^s x)`.
pub fn exact_one_minus_x_power(m: u32, x: &Rational, p: &Rational, q: &Rational) -> Rational {
    (0..m).fold(Rational::one(), |acc, s| acc * (pow(p, s) - pow(q, s) * x))
}

/// The alternating-sum expansion of `(1 - x)^m_{p,q}`.
pub fn exact_expand_one_minus_x(m: u32, x: &Rational, p: &Rational, q: &Rational) -> Rational {
    let tri = |j: u32| if j == 0 { 0 } else { j * (j - 1) / 2 };
    (0..=m).fold(Rational::zero(), |acc, k| {
        let term = pow(p, tri(m - k))
            * pow(q, tri(k))
            * exact_pq_binomial(m, k, p, q).expect("k <= m")
            * pow(x, k);
        if k % 2 == 0 {
            acc + term
        } else {
            acc - term
        }
    })
}

/// The node `p^n [k] / [n+k]`.
pub fn exact_node(n: u32, k: u32, p: &Rational, q: &Rational) -> Rational {
    pow(p, n) * exact_pq_int(k, p, q) / exact_pq_int(n + k, p, q)
}

fn leading_product(n: u32, x: &Rational, p: &Rational, q: &Rational) -> Rational {
    exact_one_minus_x_power(n + 1, x, p, q)
}

/// The k-th weight straight from its definition.
pub fn exact_weight(n: u32, k: u32, p: &Rational, q: &Rational, x: &Rational) -> Result<Rational> {
    check_caps(n, k)?;
    check_pair(p, q)?;
    check_x(x)?;
    let binom = exact_pq_binomial(n + k, k, p, q)?;
    let scale = pow(p, k * n + n * (n + 1) / 2);
    Ok(binom * pow(x, k) * leading_product(n, x, p, q) / scale)
}

/// `[0], [1], ..., [len - 1]` via `[m + 1] = p^m + q [m]`.
fn int_table(len: u32, p: &Rational, q: &Rational) -> Vec<Rational> {
    let mut out = Vec::with_capacity(len as usize);
    let mut value = Rational::zero();
    let mut p_m = Rational::one();
    for _ in 0..len {
        out.push(value.clone());
        value = &p_m + q * &value;
        p_m *= p;
    }
    out
}

/// `w_0, ..., w_K`, via `w_{k+1} = w_k x p^(-n) [n+k+1] / [k+1]`.
pub fn exact_weights(
    n: u32,
    p: &Rational,
    q: &Rational,
    x: &Rational,
    last_k: u32,
) -> Result<Vec<Rational>> {
    check_caps(n, last_k)?;
    check_pair(p, q)?;
    check_x(x)?;
    let ints = int_table(n + last_k + 2, p, q);
    Ok(weights_from(n, p, q, x, last_k, &ints))
}

fn weights_from(
    n: u32,
    p: &Rational,
    q: &Rational,
    x: &Rational,
    last_k: u32,
    ints: &[Rational],
) -> Vec<Rational> {
    let step = x / pow(p, n);
    let mut w = leading_product(n, x, p, q) / pow(p, n * (n + 1) / 2);
    let mut out = Vec::with_capacity(last_k as usize + 1);
    for k in 0..=last_k as usize {
        out.push(w.clone());
        if k < last_k as usize {
            w = w * &step * &ints[n as usize + k + 1] / &ints[k + 1];
        }
    }
    out
}

/// `1 - sum_{k<=K} w_k(x)`: exactly the probability mass beyond `K`.
pub fn exact_identity_residual(
    n: u32,
    p: &Rational,
    q: &Rational,
    x: &Rational,
    last_k: u32,
) -> Result<Rational> {
    let ws = exact_weights(n, p, q, x, last_k)?;
    Ok(ws.into_iter().fold(Rational::one(), |acc, w| acc - w))
}

fn poly_eval(coeffs: &[Rational], t: &Rational) -> Rational {
    coeffs
        .iter()
        .rev()
        .fold(Rational::zero(), |acc, c| acc * t + c)
}

/// Interval enclosure of `sum c_i t^i` over `t in [0, 1]`.
fn poly_range(coeffs: &[Rational]) -> (Rational, Rational) {
    let c0 = coeffs.first().cloned().unwrap_or_else(Rational::zero);
    let (mut lo, mut hi) = (c0.clone(), c0);
    for c in coeffs.iter().skip(1) {
        if c.is_negative() {
            lo += c;
        } else {
            hi += c;
        }
    }
    (lo, hi)
}

/// Certified enclosure of `M_{n,p,q}(f; x)` for polynomial
/// `f(t) = sum coeffs[i] t^i` from the first `K + 1` terms and the exact tail.
pub fn exact_polynomial_bracket(
    n: u32,
    p: &Rational,
    q: &Rational,
    x: &Rational,
    coeffs: &[Rational],
    last_k: u32,
) -> Result<ExactBracket> {
    if coeffs.len() > MAX_POLY_DEGREE + 1 {
        return Err(Error::OracleCap(format!(
            "polynomial degree {} > {MAX_POLY_DEGREE}",
            coeffs.len() - 1
        )));
    }
    check_caps(n, last_k)?;
    check_pair(p, q)?;
    check_x(x)?;
    let ints = int_table(n + last_k + 2, p, q);
    let p_n = pow(p, n);
    let mut head = Rational::zero();
    let mut tail = Rational::one();
    for (k, w) in weights_from(n, p, q, x, last_k, &ints).iter().enumerate() {
        let node = &p_n * &ints[k] / &ints[n as usize + k];
        head += w * poly_eval(coeffs, &node);
        tail -= w;
    }
    let (lo, hi) = poly_range(coeffs);
    let zero = Rational::zero();
    let lower = &head + &tail * lo.min(zero.clone());
    let upper = &head + &tail * hi.max(zero);
    Ok(ExactBracket { lower, upper })
}
