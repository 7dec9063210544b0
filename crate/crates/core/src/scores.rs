//! Score functions `a(u)` on `[0, 1]` together with their antiderivatives
//! `A(u) = int_0^u a(s) ds`.
//!
//! Only differences of `A` enter the estimating functions, so every built-in
//! antiderivative is normalised to `A(0) = 0`. Closed forms are used for all
//! built-in families; [`ScoreFunction::custom`] falls back to cached adaptive
//! quadrature when no antiderivative is supplied.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{beta_quantile, f_quantile, ln_beta, norm_pdf, norm_quantile};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How an unbounded score is pulled away from the endpoints of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// `u -> (n u + 0.5) / (n + 1)`, intended for normal scores.
    Normal,
    /// `u -> n u / (n + 1)`, intended for extreme-value (logrank) scores.
    Extreme,
}

#[derive(Clone)]
pub enum ScoreKind {
    Wilcoxon,
    /// Unbounded extreme-value score `-1 - log(1 - u)`.
    Logrank,
    ShiftedLogrank { n: usize },
    /// Unbounded normal score `Phi^{-1}(u)`.
    Normal,
    WinsorizedNormal { alpha: f64 },
    GeneralizedF { m1: f64, m2: f64 },
    Truncated { base: Box<ScoreFunction>, n: usize, mode: TruncationMode },
    Custom(Arc<CustomScore>),
}

pub struct CustomScore {
    label: String,
    a: ScalarFn,
    antiderivative: Option<ScalarFn>,
    knots: Vec<f64>,
    knot_values: Vec<f64>,
}

const CUSTOM_KNOTS: usize = 64;
const CUSTOM_QUAD_TOL: f64 = 1e-12;

impl CustomScore {
    fn big_a(&self, u: f64) -> f64 {
        if let Some(anti) = &self.antiderivative {
            return anti(u) - anti(0.0);
        }
        let u = u.clamp(0.0, 1.0);
        let k = ((u * CUSTOM_KNOTS as f64).floor() as usize).min(CUSTOM_KNOTS - 1);
        let a = &self.a;
        self.knot_values[k] + quad::integrate(|s| a(s), self.knots[k], u, CUSTOM_QUAD_TOL)
    }
}

/// A score family member. Cheap to clone.
#[derive(Clone)]
pub struct ScoreFunction {
    kind: ScoreKind,
}

impl fmt::Debug for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScoreFunction({})", self.label())
    }
}

impl ScoreFunction {
    pub fn wilcoxon() -> Self {
        Self { kind: ScoreKind::Wilcoxon }
    }

    /// The unbounded extreme-value score; use [`ScoreFunction::truncated`] or
    /// [`ScoreFunction::shifted_logrank`] before estimation.
    pub fn logrank() -> Self {
        Self { kind: ScoreKind::Logrank }
    }

    /// `a(u) = -1 - log(1 - n u / (n + 1))`, bounded on `[0, 1]`.
    pub fn shifted_logrank(n: usize) -> Self {
        Self { kind: ScoreKind::ShiftedLogrank { n: n.max(1) } }
    }

    /// The unbounded normal score; see [`ScoreFunction::winsorized_normal`].
    pub fn normal() -> Self {
        Self { kind: ScoreKind::Normal }
    }

    pub fn winsorized_normal(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::BadAlpha(alpha));
        }
        Ok(Self { kind: ScoreKind::WinsorizedNormal { alpha } })
    }

    /// Generalized-F score with `-m1 <= a(u) <= m2`.
    pub fn generalized_f(m1: f64, m2: f64) -> Result<Self> {
        if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
            return Err(Error::BadShape { m1, m2 });
        }
        Ok(Self { kind: ScoreKind::GeneralizedF { m1, m2 } })
    }

    /// Composes `base` with the endpoint-avoiding map selected by `mode`.
    pub fn truncated(base: ScoreFunction, n: usize, mode: TruncationMode) -> Self {
        Self { kind: ScoreKind::Truncated { base: Box::new(base), n: n.max(1), mode } }
    }

    /// User-supplied score. Without an antiderivative, `A` is computed by
    /// adaptive quadrature from a table cached at construction.
    pub fn custom<F>(label: impl Into<String>, a: F, antiderivative: Option<ScalarFn>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let a: ScalarFn = Arc::new(a);
        let knots: Vec<f64> = (0..=CUSTOM_KNOTS).map(|k| k as f64 / CUSTOM_KNOTS as f64).collect();
        let mut knot_values = vec![0.0; CUSTOM_KNOTS + 1];
        if antiderivative.is_none() {
            for k in 1..=CUSTOM_KNOTS {
                let f = &a;
                knot_values[k] = knot_values[k - 1]
                    + quad::integrate(|s| f(s), knots[k - 1], knots[k], CUSTOM_QUAD_TOL);
            }
        }
        Self {
            kind: ScoreKind::Custom(Arc::new(CustomScore {
                label: label.into(),
                a,
                antiderivative,
                knots,
                knot_values,
            })),
        }
    }

    /// `c1 a(u) + c2` with its exact antiderivative.
    pub fn affine(&self, c1: f64, c2: f64) -> Self {
        let a_base = self.clone();
        let big_base = self.clone();
        Self::custom(
            format!("{:e}*{}+{:e}", c1, self.label(), c2),
            move |u| c1 * a_base.a(u) + c2,
            Some(Arc::new(move |u| c1 * big_base.antiderivative(u) + c2 * u)),
        )
    }

    pub fn kind(&self) -> &ScoreKind {
        &self.kind
    }

    pub fn is_wilcoxon(&self) -> bool {
        matches!(self.kind, ScoreKind::Wilcoxon)
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ScoreKind::Wilcoxon => "wilcoxon".into(),
            ScoreKind::Logrank => "logrank_unbounded".into(),
            ScoreKind::ShiftedLogrank { n } => format!("logrank(n={n})"),
            ScoreKind::Normal => "normal_unbounded".into(),
            ScoreKind::WinsorizedNormal { alpha } => format!("normal:alpha={alpha}"),
            ScoreKind::GeneralizedF { m1, m2 } => format!("genf:m1={m1},m2={m2}"),
            ScoreKind::Truncated { base, n, mode } => {
                format!("truncated({},n={n},{})", base.label(), match mode {
                    TruncationMode::Normal => "normal",
                    TruncationMode::Extreme => "extreme",
                })
            }
            ScoreKind::Custom(c) => c.label.clone(),
        }
    }

    /// The score `a(u)`.
    pub fn a(&self, u: f64) -> f64 {
        match &self.kind {
            ScoreKind::Wilcoxon => u,
            ScoreKind::Logrank => -1.0 - (-u).ln_1p(),
            ScoreKind::ShiftedLogrank { n } => {
                let c = *n as f64 / (*n as f64 + 1.0);
                -1.0 - (-c * u).ln_1p()
            }
            ScoreKind::Normal => norm_quantile(u),
            ScoreKind::WinsorizedNormal { alpha } => norm_quantile(u.clamp(*alpha, 1.0 - alpha)),
            ScoreKind::GeneralizedF { m1, m2 } => {
                if u <= 0.0 {
                    return -m1;
                }
                if u >= 1.0 {
                    return *m2;
                }
                let (x, c) = beta_quantile(u, *m1, *m2);
                if x <= 0.5 {
                    (m1 + m2) * x - m1
                } else {
                    m2 - (m1 + m2) * c
                }
            }
            ScoreKind::Truncated { base, n, mode } => base.a(truncation_map(u, *n, *mode)),
            ScoreKind::Custom(c) => (c.a)(u),
        }
    }

    /// The antiderivative `A(u)` normalised to `A(0) = 0`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        match &self.kind {
            ScoreKind::Wilcoxon => 0.5 * u * u,
            ScoreKind::Logrank => {
                if u >= 1.0 {
                    0.0
                } else {
                    (1.0 - u) * (-u).ln_1p()
                }
            }
            ScoreKind::ShiftedLogrank { n } => {
                let c = *n as f64 / (*n as f64 + 1.0);
                (1.0 - c * u) * (-c * u).ln_1p() / c
            }
            ScoreKind::Normal => {
                if u <= 0.0 || u >= 1.0 {
                    0.0
                } else {
                    -norm_pdf(norm_quantile(u))
                }
            }
            ScoreKind::WinsorizedNormal { alpha } => {
                let z = -norm_quantile(*alpha);
                if u <= *alpha {
                    -z * u
                } else if u >= 1.0 - alpha {
                    z * (u - 1.0)
                } else {
                    -z * alpha + norm_pdf(z) - norm_pdf(norm_quantile(u))
                }
            }
            ScoreKind::GeneralizedF { m1, m2 } => {
                if u <= 0.0 || u >= 1.0 {
                    return 0.0;
                }
                let (x, c) = beta_quantile(u, *m1, *m2);
                -(m1 * x.ln() + m2 * c.ln() - ln_beta(*m1, *m2)).exp()
            }
            ScoreKind::Truncated { base, n, mode } => {
                let nf = *n as f64;
                let g0 = truncation_map(0.0, *n, *mode);
                (nf + 1.0) / nf
                    * (base.antiderivative(truncation_map(u, *n, *mode)) - base.antiderivative(g0))
            }
            ScoreKind::Custom(c) => c.big_a(u),
        }
    }

    /// `(a(0), a(1))`; may be infinite for the unbounded families.
    pub fn bounds(&self) -> (f64, f64) {
        (self.a(0.0), self.a(1.0))
    }

    /// Average of `a` over `[lo, hi]`, i.e. the difference quotient of `A`
    /// across a jump; reduces to `a(lo)` when the interval is degenerate.
    pub fn mean_over(&self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            if self.is_wilcoxon() {
                0.5 * (lo + hi)
            } else {
                (self.antiderivative(hi) - self.antiderivative(lo)) / (hi - lo)
            }
        } else {
            self.a(hi)
        }
    }

    /// `(A(1) - A(f)) / (1 - f)`, with the limit `a(1)` at `f = 1`.
    pub fn tail_mean(&self, f: f64) -> f64 {
        if f >= 1.0 {
            self.a(1.0)
        } else if self.is_wilcoxon() {
            0.5 * (1.0 + f)
        } else {
            (self.antiderivative(1.0) - self.antiderivative(f)) / (1.0 - f)
        }
    }

    /// `A(1) - A(0)`, the per-observation mean of the imputed scores.
    pub fn total(&self) -> f64 {
        self.antiderivative(1.0) - self.antiderivative(0.0)
    }

    /// Evaluates the jump averages and tail means for the cumulative levels
    /// `0 = c_0 < c_1 < ... < c_m = 1`, computing `A` once per level.
    ///
    /// Returns `(gamma, tail)` with `gamma[k]` the mean of `a` over
    /// `(c_k, c_{k+1}]` and `tail[k]` the tail mean at `c_k`.
    pub fn level_scores(&self, cum: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = cum.len();
        let mut gamma = Vec::with_capacity(m);
        let mut tail = Vec::with_capacity(m + 1);
        if self.is_wilcoxon() {
            let mut prev = 0.0;
            tail.push(0.5);
            for &c in cum {
                gamma.push(self.mean_over(prev, c));
                tail.push(self.tail_mean(c));
                prev = c;
            }
            return (gamma, tail);
        }
        let a_one = self.antiderivative(1.0);
        let a1_limit = self.a(1.0);
        let mut prev = 0.0;
        let mut prev_big = self.antiderivative(0.0);
        tail.push((a_one - prev_big) / 1.0);
        for &c in cum {
            let big = if c >= 1.0 { a_one } else { self.antiderivative(c) };
            gamma.push(if c > prev { (big - prev_big) / (c - prev) } else { self.a(c) });
            tail.push(if c >= 1.0 { a1_limit } else { (a_one - big) / (1.0 - c) });
            prev = c;
            prev_big = big;
        }
        (gamma, tail)
    }

    /// Generalized-F score evaluated through the central F quantile form
    /// `m1 m2 (q - 1) / (m2 + m1 q)`, `q = F^{-1}_{2m1,2m2}(u)`. Used to cross-check
    /// the beta-quantile form in [`ScoreFunction::a`].
    pub fn generalized_f_via_f_quantile(m1: f64, m2: f64, u: f64) -> f64 {
        let q = f_quantile(u, 2.0 * m1, 2.0 * m2);
        if q.is_infinite() {
            return m2;
        }
        m1 * m2 * (q - 1.0) / (m2 + m1 * q)
    }
}

fn truncation_map(u: f64, n: usize, mode: TruncationMode) -> f64 {
    let nf = n as f64;
    match mode {
        TruncationMode::Normal => (nf * u + 0.5) / (nf + 1.0),
        TruncationMode::Extreme => nf * u / (nf + 1.0),
    }
}

/// Textual score names accepted on the command line and in config files:
/// `wilcoxon`, `logrank`, `normal:alpha=<a>`, `genf:m1=<m1>,m2=<m2>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScoreSpec {
    Wilcoxon,
    /// Resolves to [`ScoreFunction::shifted_logrank`] at the sample size.
    Logrank,
    Normal { alpha: f64 },
    GenF { m1: f64, m2: f64 },
}

impl ScoreSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, params) = match text.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (text, ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::BadScoreSpec(text.into()))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::BadScoreSpec(text.into()))?;
            kv.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::BadScoreSpec(text.into()));
        let spec = match name.to_ascii_lowercase().as_str() {
            "wilcoxon" if kv.is_empty() => ScoreSpec::Wilcoxon,
            "logrank" if kv.is_empty() => ScoreSpec::Logrank,
            "normal" if kv.len() == 1 => ScoreSpec::Normal { alpha: get("alpha")? },
            "genf" if kv.len() == 2 => ScoreSpec::GenF { m1: get("m1")?, m2: get("m2")? },
            _ => return Err(Error::BadScoreSpec(text.into())),
        };
        // validate parameters eagerly
        spec.build(1)?;
        Ok(spec)
    }

    pub fn build(&self, n: usize) -> Result<ScoreFunction> {
        match *self {
            ScoreSpec::Wilcoxon => Ok(ScoreFunction::wilcoxon()),
            ScoreSpec::Logrank => Ok(ScoreFunction::shifted_logrank(n)),
            ScoreSpec::Normal { alpha } => ScoreFunction::winsorized_normal(alpha),
            ScoreSpec::GenF { m1, m2 } => ScoreFunction::generalized_f(m1, m2),
        }
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreSpec::Wilcoxon => write!(f, "wilcoxon"),
            ScoreSpec::Logrank => write!(f, "logrank"),
            ScoreSpec::Normal { alpha } => write!(f, "normal:alpha={alpha}"),
            ScoreSpec::GenF { m1, m2 } => write!(f, "genf:m1={m1},m2={m2}"),
        }
    }
}
