//! Proper step CDFs on the residual scale and the self-consistent estimator.

use std::io::Write;

use serde::Serialize;

use crate::data::ResidualView;
use crate::error::{Error, Result};
use crate::scores::ScoreFunction;

/// A discrete CDF stored as sorted jump locations and cumulative masses.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    points: Vec<f64>,
    cum: Vec<f64>,
}

/// `F(t)`, `F(t-)` and the mid-CDF `(F(t) + F(t-)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidCdfValue {
    pub f: f64,
    pub f_minus: f64,
    pub mid: f64,
}

impl StepCdf {
    /// Builds a CDF from strictly increasing `points` and nondecreasing `cum`
    /// ending at 1.
    pub fn from_parts(points: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != cum.len() {
            return Err(Error::InvalidSample("step CDF needs matching, non-empty points and masses".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSample("jump points must be finite and strictly increasing".into()));
        }
        let mut prev = 0.0;
        for &c in &cum {
            if !(c > 0.0 && c >= prev && c <= 1.0) {
                return Err(Error::InvalidSample(format!("invalid cumulative mass {c}")));
            }
            prev = c;
        }
        if *cum.last().unwrap() != 1.0 {
            return Err(Error::InvalidSample("step CDF must be proper (total mass 1)".into()));
        }
        Ok(Self { points, cum })
    }

    /// Empirical CDF of `values` (ties pool their mass).
    pub fn empirical(values: &[f64]) -> Result<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mut points = Vec::new();
        let mut cum = Vec::new();
        for (i, &t) in v.iter().enumerate() {
            if i + 1 == v.len() || v[i + 1] != t {
                points.push(t);
                cum.push((i + 1) as f64 / n);
            }
        }
        if let Some(c) = cum.last_mut() {
            *c = 1.0;
        }
        Self::from_parts(points, cum)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterates over jumps as `(t, F(t-), F(t))`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points.iter().enumerate().map(move |(k, &t)| {
            let lo = if k == 0 { 0.0 } else { self.cum[k - 1] };
            (t, lo, self.cum[k])
        })
    }

    pub fn eval(&self, t: f64) -> MidCdfValue {
        let k = self.points.partition_point(|&p| p <= t);
        let f = if k == 0 { 0.0 } else { self.cum[k - 1] };
        let f_minus = if k > 0 && self.points[k - 1] == t {
            if k >= 2 {
                self.cum[k - 2]
            } else {
                0.0
            }
        } else {
            f
        };
        MidCdfValue { f, f_minus, mid: 0.5 * (f + f_minus) }
    }

    /// `1 - F(t)`, clamped at zero.
    pub fn survival(&self, t: f64) -> f64 {
        (1.0 - self.eval(t).f).max(0.0)
    }

    /// `1 - F(t-)`, clamped at zero.
    pub fn survival_minus(&self, t: f64) -> f64 {
        (1.0 - self.eval(t).f_minus).max(0.0)
    }

    /// Jump-aware score: the mean of `a` over `[F(t-), F(t)]`, or `a(F(t))` at
    /// a continuity point.
    pub fn gamma_a(&self, t: f64, score: &ScoreFunction) -> f64 {
        let v = self.eval(t);
        score.mean_over(v.f_minus, v.f)
    }

    /// Tail mean of `a` above `F(t)`; `a(1)` once the CDF has reached 1.
    pub fn big_gamma_a(&self, t: f64, score: &ScoreFunction) -> f64 {
        score.tail_mean(self.eval(t).f)
    }

    /// `int_{(t, inf)} gamma_a(s) dF(s)`, summed jump by jump.
    pub fn stieltjes_gamma_integral(&self, t: f64, score: &ScoreFunction) -> f64 {
        let start = self.points.partition_point(|&p| p <= t);
        let (gamma, _) = score.level_scores(&self.cum);
        (start..self.len())
            .map(|k| {
                let lo = if k == 0 { 0.0 } else { self.cum[k - 1] };
                gamma[k] * (self.cum[k] - lo)
            })
            .sum()
    }

    /// The generalized mid-CDF `u` in `[F(t-), F(t)]` with `a(u) = gamma_a(t)`,
    /// found by bisection. Requires a nondecreasing score.
    pub fn mid_cdf_for_score(&self, t: f64, score: &ScoreFunction) -> f64 {
        let v = self.eval(t);
        if v.f <= v.f_minus {
            return v.f;
        }
        let target = score.mean_over(v.f_minus, v.f);
        let (mut lo, mut hi) = (v.f_minus, v.f);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if score.a(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Writes `t,F_minus,F,mid` rows, one per jump.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "F_minus", "F", "mid"])?;
        for (t, lo, hi) in self.jumps() {
            w.write_record([
                format!("{t:.16e}"),
                format!("{lo:.16e}"),
                format!("{hi:.16e}"),
                format!("{:.16e}", 0.5 * (lo + hi)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Kaplan-Meier estimate on `(e, delta_mod)`. Censored residuals tied with
/// failures stay in the risk set at that value.
pub fn self_consistent(view: &ResidualView) -> Result<StepCdf> {
    let n = view.e.len();
    let mut at_risk = n;
    let mut surv = 1.0f64;
    let mut points = Vec::new();
    let mut cum = Vec::new();
    for (t, group) in view.tie_groups() {
        let d = group.iter().filter(|&&i| view.delta_mod[i]).count();
        if d > 0 {
            surv = if d == at_risk { 0.0 } else { (surv * (1.0 - d as f64 / at_risk as f64)).max(0.0) };
            points.push(t);
            cum.push(1.0 - surv);
        }
        at_risk -= group.len();
    }
    if points.is_empty() {
        return Err(Error::DegenerateSample("no failures after the last-observation rule".into()));
    }
    if surv != 0.0 {
        return Err(Error::DegenerateSample("largest residual is not a failure".into()));
    }
    Ok(StepCdf { points, cum })
}
