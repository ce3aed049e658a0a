//! (p,q)-calculus primitives.
//!
//! Everything here is evaluated through the ratio `tau = q/p`:
//!
//! ```text
//! [n]_{p,q}     = p^(n-1) * [n]_tau,      [n]_tau = (1 - tau^n) / (1 - tau)
//! [n k]_{p,q}   = p^(k(n-k)) * [n k]_tau
//! ```
//!
//! so that `p^n - q^n` is never formed and the classical limit `tau -> 1`
//! stays accurate. `1 - tau^m` is computed as `-expm1(m * ln tau)` with
//! `ln tau = ln_1p(-(p - q)/p)`.

use crate::error::{Error, Result};

/// Running products are moved to log space when they leave this band.
const LINEAR_BAND: (f64, f64) = (1e-300, 1e300);

/// The parameter pair `0 < q < p <= 1`, or the classical limit `p = q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PQPair {
    p: f64,
    q: f64,
    tau: f64,
    /// `1 - tau`, formed as `(p - q) / p`.
    gap: f64,
    ln_tau: f64,
    classical: bool,
}

impl PQPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && q > 0.0 && q < p && p <= 1.0) {
            return Err(Error::InvalidPair { p, q });
        }
        let gap = (p - q) / p;
        Ok(Self {
            p,
            q,
            tau: q / p,
            gap,
            ln_tau: (-gap).ln_1p(),
            classical: false,
        })
    }

    /// The degenerate pair `p = q = 1`, where every (p,q)-quantity reduces to
    /// its ordinary counterpart. Only reachable through this constructor.
    pub fn classical() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            tau: 1.0,
            gap: 0.0,
            ln_tau: 0.0,
            classical: true,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    /// `tau^m`.
    pub fn tau_pow(&self, m: u64) -> f64 {
        if self.classical || m == 0 {
            1.0
        } else {
            (m as f64 * self.ln_tau).exp()
        }
    }

    /// `1 - tau^m` without cancellation.
    pub fn one_minus_tau_pow(&self, m: u64) -> f64 {
        if self.classical || m == 0 {
            0.0
        } else if m == 1 {
            self.gap
        } else {
            -(m as f64 * self.ln_tau).exp_m1()
        }
    }

    /// The tau-integer `[m]_tau = (1 - tau^m)/(1 - tau)`; `m` in classical mode.
    pub fn tau_int(&self, m: u64) -> f64 {
        match m {
            0 => 0.0,
            1 => 1.0,
            _ if self.classical => m as f64,
            _ => self.one_minus_tau_pow(m) / self.gap,
        }
    }

    fn p_pow(&self, e: u64) -> f64 {
        if self.classical || e == 0 {
            1.0
        } else if e <= i32::MAX as u64 {
            self.p.powi(e as i32)
        } else {
            (e as f64 * self.p.ln()).exp()
        }
    }
}

/// The (p,q)-integer `[n]_{p,q} = (p^n - q^n)/(p - q)`, with `[0] = 0`.
pub fn pq_int(n: u64, pq: PQPair) -> f64 {
    if n == 0 {
        return 0.0;
    }
    pq.p_pow(n - 1) * pq.tau_int(n)
}

/// `ln [n]_{p,q}` for `n >= 1`.
fn ln_pq_int(n: u64, pq: PQPair) -> f64 {
    let p_part = if pq.classical {
        0.0
    } else {
        (n - 1) as f64 * pq.p.ln()
    };
    p_part + pq.tau_int(n).ln()
}

/// `[n]_{p,q}! = [1][2]...[n]`, with `[0]! = 1`. May overflow to infinity for
/// large `n`; see [`log_pq_factorial`].
pub fn pq_factorial(n: u64, pq: PQPair) -> f64 {
    (1..=n).map(|j| pq_int(j, pq)).product()
}

/// Natural log of [`pq_factorial`], summed term by term.
pub fn log_pq_factorial(n: u64, pq: PQPair) -> f64 {
    (1..=n).map(|j| ln_pq_int(j, pq)).sum()
}

/// The (p,q)-binomial coefficient via `prod_{j=1..k} [n-k+j]/[j]`.
pub fn pq_binomial(n: u64, k: u64, pq: PQPair) -> Result<f64> {
    if k > n {
        return Err(Error::BinomialIndex { n, k });
    }
    // Each factor [n-k+j]/[j] = p^(n-k) * [n-k+j]_tau / [j]_tau.
    let p_factor = pq.p_pow(n - k);
    let ln_p_factor = if pq.classical {
        0.0
    } else {
        (n - k) as f64 * pq.p.ln()
    };
    let mut product = 1.0_f64;
    let mut log_acc: Option<f64> = None;
    for j in 1..=k {
        let (top, bottom) = (pq.tau_int(n - k + j), pq.tau_int(j));
        let ratio = top / bottom;
        match log_acc.as_mut() {
            Some(acc) => *acc += ln_p_factor + ratio.ln(),
            None => {
                // Multiply before dividing: keeps the classical case in integers.
                let next = product * top / bottom * p_factor;
                if next.is_finite() && next >= LINEAR_BAND.0 && next <= LINEAR_BAND.1 {
                    product = next;
                } else {
                    log_acc = Some(product.ln() + ln_p_factor + ratio.ln());
                }
            }
        }
    }
    Ok(match log_acc {
        Some(acc) => acc.exp(),
        None => product,
    })
}

/// `(1 - x)^n_{p,q} = prod_{s=0..n-1} (p^s - q^s x)`; the empty product is 1.
pub fn one_minus_x_power(n: u64, x: f64, pq: PQPair) -> f64 {
    let mut out = 1.0;
    let (mut ps, mut qs) = (1.0_f64, 1.0_f64);
    for _ in 0..n {
        out *= ps - qs * x;
        ps *= pq.p;
        qs *= pq.q;
    }
    out
}

/// The alternating-sum expansion
/// `sum_k (-1)^k p^((n-k)(n-k-1)/2) q^(k(k-1)/2) [n k]_{p,q} x^k`.
/// Only meant as a cross-check of [`one_minus_x_power`]; it cancels badly
/// once `n` is large.
pub fn expand_one_minus_x(n: u64, x: f64, pq: PQPair) -> f64 {
    let tri = |m: u64| if m == 0 { 0 } else { m * (m - 1) / 2 };
    let mut sum = 0.0;
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let coef = pq_binomial(n, k, pq).expect("k <= n");
        let term = pq.p.powf(tri(n - k) as f64) * pq.q.powf(tri(k) as f64) * coef;
        sum += sign * term * x.powi(k as i32);
    }
    sum
}

/// Residuals of the two Pascal-type recurrences
///
/// ```text
/// [n k] = q^(n-k) [n-1 k-1] + p^k [n-1 k]
/// [n k] = p^(n-k) [n-1 k-1] + q^k [n-1 k]
/// ```
pub fn pascal_residuals(n: u64, k: u64, pq: PQPair) -> Result<(f64, f64)> {
    if k == 0 || k >= n {
        return Err(Error::PascalIndex { n, k });
    }
    let whole = pq_binomial(n, k, pq)?;
    let left = pq_binomial(n - 1, k - 1, pq)?;
    let right = pq_binomial(n - 1, k, pq)?;
    let (p, q) = (pq.p, pq.q);
    let first = whole - q.powi((n - k) as i32) * left - p.powi(k as i32) * right;
    let second = whole - p.powi((n - k) as i32) * left - q.powi(k as i32) * right;
    Ok((first.abs(), second.abs()))
}
