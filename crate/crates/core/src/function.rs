//! Real functions on `[0, 1]` fed to the operator.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expression;

type EvalFn = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// Text of the cubic used in the convergence figures.
pub const CUBIC_TEXT: &str = "(x-1/3)*(x-1/2)*(x-3/4)";

#[derive(Clone)]
pub struct Function {
    eval: Arc<EvalFn>,
    sup_hint: Option<f64>,
    label: String,
}

impl fmt::Debug for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Function")
            .field("label", &self.label)
            .field("sup_hint", &self.sup_hint)
            .finish()
    }
}

impl Function {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(move |t| Ok(f(t))),
            sup_hint: None,
            label: label.into(),
        }
    }

    pub fn fallible<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            sup_hint: None,
            label: label.into(),
        }
    }

    /// Attaches a known bound on `sup_{[0,1]} |f|`. The bound is trusted.
    pub fn with_sup_hint(mut self, sup: f64) -> Self {
        self.sup_hint = Some(sup);
        self
    }

    pub fn from_expression(expr: Expression) -> Self {
        let label = expr.to_string();
        Self::fallible(label, move |t| expr.eval(t))
    }

    /// `f == 1`.
    pub fn one() -> Self {
        Self::new("one", |_| 1.0).with_sup_hint(1.0)
    }

    /// `f(t) = t`.
    pub fn identity() -> Self {
        Self::new("identity", |t| t).with_sup_hint(1.0)
    }

    /// `f(t) = t^j`.
    pub fn monomial(j: u32) -> Self {
        let label = match j {
            0 => "one".to_string(),
            1 => "identity".to_string(),
            _ => format!("t^{j}"),
        };
        Self::new(label, move |t| t.powi(j as i32)).with_sup_hint(1.0)
    }

    /// `(x - 1/3)(x - 1/2)(x - 3/4)`; its sup on `[0, 1]` is `|f(0)| = 1/8`.
    pub fn cubic() -> Self {
        Self::new("paper_cubic", |t| (t - 1.0 / 3.0) * (t - 0.5) * (t - 0.75)).with_sup_hint(0.125)
    }

    /// `|x - 1/2|`.
    pub fn abs_centered() -> Self {
        Self::new("abs(x-1/2)", |t| (t - 0.5).abs()).with_sup_hint(0.5)
    }

    /// Resolves a preset name (`paper_cubic`, `identity`, `one`) or parses an
    /// expression in `x`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "paper_cubic" => Ok(Self::cubic()),
            "identity" => Ok(Self::identity()),
            "one" => Ok(Self::one()),
            "" => Err(Error::Syntax {
                position: 1,
                message: "empty function specification".into(),
            }),
            other => Expression::parse(other).map(Self::from_expression),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        (self.eval)(t)
    }

    pub fn sup_hint(&self) -> Option<f64> {
        self.sup_hint
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest `|f|` over a uniform grid of `points` nodes on `[0, 1]`,
    /// skipping points where `f` is undefined.
    pub fn grid_sup(&self, points: usize) -> f64 {
        let last = (points.max(2) - 1) as f64;
        (0..points.max(2))
            .filter_map(|i| self.eval(i as f64 / last).ok())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
