//! Exponent tuples `(n, p, t, r, q, eta)` with derived conjugates and the
//! nontriviality dichotomy: the primal norm is nonzero only when
//! `1 < p < t < r < inf` or `1 < p <= t < r = inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outer aggregation exponent `r`; `Infinite` selects sup-aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterExp {
    Finite(f64),
    Infinite,
}

impl OuterExp {
    pub fn is_finite(&self) -> bool {
        matches!(self, OuterExp::Finite(_))
    }

    /// Numeric value; `f64::INFINITY` for the sup case.
    pub fn value(&self) -> f64 {
        match self {
            OuterExp::Finite(r) => *r,
            OuterExp::Infinite => f64::INFINITY,
        }
    }

    pub fn recip(&self) -> f64 {
        match self {
            OuterExp::Finite(r) => 1.0 / r,
            OuterExp::Infinite => 0.0,
        }
    }

    /// Hoelder conjugate; `r = inf` pairs with `r' = 1`.
    pub fn conjugate(&self) -> f64 {
        match self {
            OuterExp::Finite(r) => conjugate(*r),
            OuterExp::Infinite => 1.0,
        }
    }
}

impl std::fmt::Display for OuterExp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OuterExp::Finite(r) => write!(f, "{r}"),
            OuterExp::Infinite => write!(f, "inf"),
        }
    }
}

/// `x' = x / (x - 1)` for `x` in `(1, inf)`.
pub fn conjugate(x: f64) -> f64 {
    x / (x - 1.0)
}

/// The tuple governing every norm: dimension, integrability `p`, Morrey
/// scaling `t`, aggregation `r`, value-space exponent `q`, and the optional
/// maximal-operator power `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub struct ExponentSet {
    dim: usize,
    p: f64,
    t: f64,
    r: OuterExp,
    q: f64,
    eta: Option<f64>,
    p_conj: f64,
    t_conj: f64,
    r_conj: f64,
    q_conj: f64,
}

impl ExponentSet {
    pub fn new(dim: usize, p: f64, t: f64, r: OuterExp, q: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidExponent(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        for (name, value) in [("p", p), ("t", t), ("q", q)] {
            if !value.is_finite() {
                return Err(Error::InvalidExponent(format!("{name} must be finite")));
            }
        }
        if p <= 1.0 {
            return Err(Error::InvalidExponent(format!("need p > 1, got p = {p}")));
        }
        if t < p {
            return Err(Error::InvalidExponent(format!(
                "need p <= t, got p = {p}, t = {t}"
            )));
        }
        if q <= 1.0 {
            return Err(Error::InvalidExponent(format!(
                "need q in (1, inf), got q = {q}"
            )));
        }
        if let OuterExp::Finite(rv) = r {
            if !(rv > 1.0 && rv.is_finite()) {
                return Err(Error::InvalidExponent(format!(
                    "need r in (1, inf], got r = {rv}"
                )));
            }
        }
        Ok(Self {
            dim,
            p,
            t,
            r,
            q,
            eta: None,
            p_conj: conjugate(p),
            t_conj: conjugate(t),
            r_conj: r.conjugate(),
            q_conj: conjugate(q),
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        let cap = self.p_conj.min(self.q_conj);
        if !(eta > 0.0 && eta < cap) {
            return Err(Error::InvalidExponent(format!(
                "need eta in (0, min(p', q')) = (0, {cap}), got {eta}"
            )));
        }
        self.eta = Some(eta);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn r(&self) -> OuterExp {
        self.r
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn eta(&self) -> Option<f64> {
        self.eta
    }
    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }
    pub fn t_conj(&self) -> f64 {
        self.t_conj
    }
    /// `r'`; equals 1 when `r = inf`.
    pub fn r_conj(&self) -> f64 {
        self.r_conj
    }
    pub fn q_conj(&self) -> f64 {
        self.q_conj
    }

    /// Exponent of `|Q|` in the primal cube terms, `1/t - 1/p` (negative).
    pub fn primal_weight_exp(&self) -> f64 {
        1.0 / self.t - 1.0 / self.p
    }

    /// Exponent of `|Q|` in the block capacity weights,
    /// `1/t' - 1/p' = 1/p - 1/t` (positive).
    pub fn dual_weight_exp(&self) -> f64 {
        1.0 / self.p - 1.0 / self.t
    }

    /// Nontriviality dichotomy: `p < t < r < inf` or `p <= t < r = inf`.
    pub fn is_nontrivial(&self) -> bool {
        match self.r {
            OuterExp::Finite(r) => self.p < self.t && self.t < r,
            OuterExp::Infinite => self.p <= self.t,
        }
    }

    pub fn require_nontrivial(&self) -> Result<()> {
        if self.is_nontrivial() {
            Ok(())
        } else {
            Err(Error::TrivialRegime(format!(
                "p = {}, t = {}, r = {}",
                self.p, self.t, self.r
            )))
        }
    }

    /// Translation-invariance constant `2^{n / r'}`.
    pub fn translation_constant(&self) -> f64 {
        f64::exp2(self.dim as f64 / self.r_conj)
    }

    /// Averaging-operator bound `(1 + sum_{i>=1} 2^{n r i (1/r - 1/t)})^{1/r}`,
    /// a geometric series converging exactly when `t < r < inf`.
    pub fn averaging_constant(&self) -> Option<f64> {
        match self.r {
            OuterExp::Finite(r) if r > self.t => {
                let x = f64::exp2(self.dim as f64 * r * (1.0 / r - 1.0 / self.t));
                Some((1.0 + x / (1.0 - x)).powf(1.0 / r))
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for ExponentSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} p={} t={} r={} q={}",
            self.dim, self.p, self.t, self.r, self.q
        )?;
        if let Some(eta) = self.eta {
            write!(f, " eta={eta}")?;
        }
        Ok(())
    }
}

/// Wire form: `r` accepts a number or the string `"inf"`.
#[derive(Serialize, Deserialize)]
struct ExponentRepr {
    n: usize,
    p: f64,
    t: f64,
    r: serde_json::Value,
    q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
}

impl TryFrom<ExponentRepr> for ExponentSet {
    type Error = Error;

    fn try_from(repr: ExponentRepr) -> Result<Self> {
        let r = match &repr.r {
            serde_json::Value::Number(x) => {
                let v = x
                    .as_f64()
                    .ok_or_else(|| Error::InvalidExponent("r is not a number".into()))?;
                OuterExp::Finite(v)
            }
            serde_json::Value::String(s) if s == "inf" || s == "infinity" => OuterExp::Infinite,
            other => {
                return Err(Error::InvalidExponent(format!(
                    "r must be a number or \"inf\", got {other}"
                )))
            }
        };
        let e = ExponentSet::new(repr.n, repr.p, repr.t, r, repr.q)?;
        match repr.eta {
            Some(eta) => e.with_eta(eta),
            None => Ok(e),
        }
    }
}

impl From<ExponentSet> for ExponentRepr {
    fn from(e: ExponentSet) -> Self {
        let r = match e.r {
            OuterExp::Finite(v) => serde_json::json!(v),
            OuterExp::Infinite => serde_json::json!("inf"),
        };
        ExponentRepr {
            n: e.dim,
            p: e.p,
            t: e.t,
            r,
            q: e.q,
            eta: e.eta,
        }
    }
}
