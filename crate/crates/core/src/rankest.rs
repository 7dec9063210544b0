//! Imputed ranks and the censored-data R-estimating function, evaluated either
//! as a rank statistic or as the equivalent weighted logrank statistic, plus
//! the Gehan (Fygenson-Ritov) comparator.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::{residuals, CensoredSample, ResidualView};
use crate::error::Result;
use crate::scores::ScoreFunction;
use crate::stepcdf::{self_consistent, StepCdf};

/// Which estimating function to solve.
#[derive(Debug, Clone)]
pub enum Method {
    /// The R-estimating function with score `a`.
    Rank(ScoreFunction),
    /// The Gehan-weighted logrank function on the observed (unmodified) data.
    Gehan,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Rank(s) => s.label(),
            Method::Gehan => "gehan".into(),
        }
    }

    pub fn score(&self) -> Option<&ScoreFunction> {
        match self {
            Method::Rank(s) => Some(s),
            Method::Gehan => None,
        }
    }
}

/// Risk-set moments at each distinct failure residual.
#[derive(Debug, Clone, Serialize)]
pub struct RiskAverages {
    pub u: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<Vec<f64>>,
    /// Row-major `p x p` blocks.
    pub theta2: Vec<Vec<f64>>,
    pub xbar_at: Vec<Vec<f64>>,
}

/// Everything derived from the residuals at one `beta`.
#[derive(Debug, Clone)]
pub struct EstimatingContext<'a> {
    sample: &'a CensoredSample,
    score: ScoreFunction,
    view: ResidualView,
    cdf: StepCdf,
    xbar: Vec<f64>,
    // number of jumps at or below each residual
    level: Vec<usize>,
    gamma: Vec<f64>,
    tail: Vec<f64>,
}

impl<'a> EstimatingContext<'a> {
    pub fn new(sample: &'a CensoredSample, score: &ScoreFunction, beta: &[f64]) -> Result<Self> {
        let view = residuals(sample, beta)?;
        let cdf = self_consistent(&view)?;
        let mut level = vec![0usize; sample.n()];
        let mut k = 0;
        for (_, group) in view.tie_groups() {
            if group.iter().any(|&i| view.delta_mod[i]) {
                k += 1;
            }
            for &i in group {
                level[i] = k;
            }
        }
        let (gamma, tail) = score.level_scores(cdf.cum());
        Ok(Self { sample, score: score.clone(), xbar: sample.xbar(), view, cdf, level, gamma, tail })
    }

    pub fn sample(&self) -> &CensoredSample {
        self.sample
    }

    pub fn score(&self) -> &ScoreFunction {
        &self.score
    }

    pub fn view(&self) -> &ResidualView {
        &self.view
    }

    pub fn cdf(&self) -> &StepCdf {
        &self.cdf
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    /// `Delta_i gamma_a(e_i) + (1 - Delta_i) Gamma_a(e_i)` with the modified
    /// failure indicators.
    pub fn imputed_ranks(&self) -> Vec<f64> {
        let ranks: Vec<f64> = (0..self.sample.n())
            .map(|i| {
                let l = self.level[i];
                if self.view.delta_mod[i] {
                    self.gamma[l - 1]
                } else {
                    self.tail[l]
                }
            })
            .collect();
        debug_assert!({
            let n = ranks.len() as f64;
            let sum: f64 = ranks.iter().sum();
            (sum - n * self.score.total()).abs() <= 1e-9 * n * (1.0 + self.score.total().abs())
        });
        ranks
    }

    /// `sum_i R_i (x_i - xbar)`.
    pub fn psi_rank_form(&self) -> Vec<f64> {
        let p = self.sample.p();
        let mut psi = vec![0.0; p];
        for (i, r) in self.imputed_ranks().into_iter().enumerate() {
            for (j, x) in self.sample.row(i).iter().enumerate() {
                psi[j] += r * (x - self.xbar[j]);
            }
        }
        psi
    }

    /// `sum_i (R_i - (A(1) - A(0))) x_i`.
    pub fn psi_centered_form(&self) -> Vec<f64> {
        let p = self.sample.p();
        let total = self.score.total();
        let mut psi = vec![0.0; p];
        for (i, r) in self.imputed_ranks().into_iter().enumerate() {
            for (j, x) in self.sample.row(i).iter().enumerate() {
                psi[j] += (r - total) * x;
            }
        }
        psi
    }

    /// `gamma_a(u) - Gamma_a(u)` evaluated on the fitted CDF.
    pub fn exact_weight(&self, u: f64) -> f64 {
        if self.score.is_wilcoxon() {
            return -0.5 * self.cdf.survival_minus(u);
        }
        self.cdf.gamma_a(u, &self.score) - self.cdf.big_gamma_a(u, &self.score)
    }

    /// Weighted logrank form with the exact weight; the default evaluation path.
    pub fn psi_wlr_form(&self) -> Vec<f64> {
        self.wlr(false).0
    }

    /// `(Psi, Sigma_hat)` from a single downward sweep.
    pub fn psi_and_sigma(&self) -> (Vec<f64>, DMatrix<f64>) {
        let (psi, sigma) = self.wlr(true);
        (psi, sigma.unwrap())
    }

    fn wlr(&self, want_sigma: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        // rank-sum conservation is checked at every evaluation in debug builds
        #[cfg(debug_assertions)]
        let _ = self.imputed_ranks();
        let wilcoxon = self.score.is_wilcoxon();
        let cum = self.cdf.cum();
        let weight = |level: usize, _count: usize| {
            if wilcoxon {
                let lo = if level >= 2 { cum[level - 2] } else { 0.0 };
                -0.5 * (1.0 - lo).max(0.0)
            } else {
                // an unbounded score has tail mean a(1) = inf at the top level,
                // where the risk set is the tie group itself and contributes nothing
                let w = self.gamma[level - 1] - self.tail[level];
                if w.is_finite() {
                    w
                } else {
                    0.0
                }
            }
        };
        weighted_sweep(self.sample, &self.view, &self.view.delta_mod, &self.level, weight, want_sigma)
    }

    /// Risk-set moments (uncentered) at each distinct failure residual.
    pub fn risk_averages(&self) -> RiskAverages {
        risk_averages(self.sample, &self.view, &self.view.delta_mod)
    }
}

/// Gehan estimating function `(1/n) sum_i Delta_i sum_{e_j >= e_i} (x_i - x_j)`
/// on the raw failure indicators.
pub fn psi_gehan(sample: &CensoredSample, beta: &[f64]) -> Result<Vec<f64>> {
    Ok(gehan_psi_and_sigma(sample, beta, false)?.0)
}

/// Gehan function together with its variance estimate.
pub fn gehan_psi_and_sigma(
    sample: &CensoredSample,
    beta: &[f64],
    want_sigma: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let view = residuals(sample, beta)?;
    let n = sample.n() as f64;
    let level = vec![0usize; sample.n()];
    Ok(weighted_sweep(sample, &view, sample.delta(), &level, |_, count| count as f64 / n, want_sigma))
}

/// Pairwise form `(1/n) sum_{i,j} Delta_i 1{e_i < e_j} (x_i - x_j)`. Quadratic
/// cost; agrees with [`psi_gehan`] whenever no censored residual ties a failure.
pub fn psi_gehan_pairwise(sample: &CensoredSample, beta: &[f64]) -> Result<Vec<f64>> {
    let view = residuals(sample, beta)?;
    let n = sample.n();
    let p = sample.p();
    let mut psi = vec![0.0; p];
    for i in 0..n {
        if !sample.delta()[i] {
            continue;
        }
        let xi = sample.row(i);
        for j in 0..n {
            if view.e[i] < view.e[j] {
                for (k, x) in sample.row(j).iter().enumerate() {
                    psi[k] += xi[k] - x;
                }
            }
        }
    }
    for v in &mut psi {
        *v /= n as f64;
    }
    Ok(psi)
}

/// Uniform entry point over methods: `Psi(beta)` and optionally `Sigma_hat(beta)`.
pub fn evaluate(
    sample: &CensoredSample,
    method: &Method,
    beta: &[f64],
    want_sigma: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    match method {
        Method::Rank(score) => {
            let ctx = EstimatingContext::new(sample, score, beta)?;
            Ok(ctx.wlr(want_sigma))
        }
        Method::Gehan => gehan_psi_and_sigma(sample, beta, want_sigma),
    }
}

// Downward sweep over tie groups keeping suffix sums of centred covariates.
fn weighted_sweep<W: Fn(usize, usize) -> f64>(
    sample: &CensoredSample,
    view: &ResidualView,
    fail: &[bool],
    level: &[usize],
    weight: W,
    want_sigma: bool,
) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let n = sample.n();
    let p = sample.p();
    let xbar = sample.xbar();
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; if want_sigma { p * p } else { 0 }];
    let mut sig = vec![0.0; if want_sigma { p * p } else { 0 }];
    let mut psi = vec![0.0; p];
    let mut xc = vec![0.0; p];
    let mut count = 0usize;
    let mut end = n;
    while end > 0 {
        let value = view.e[view.order[end - 1]];
        let mut start = end - 1;
        while start > 0 && view.e[view.order[start - 1]] == value {
            start -= 1;
        }
        let group = &view.order[start..end];
        for &i in group {
            for (j, x) in sample.row(i).iter().enumerate() {
                let c = x - xbar[j];
                s1[j] += c;
                if want_sigma {
                    for (k, y) in sample.row(i).iter().enumerate() {
                        s2[j * p + k] += c * (y - xbar[k]);
                    }
                }
            }
        }
        count += group.len();
        let cnt = count as f64;
        let mut w_group = None;
        for &i in group {
            if !fail[i] {
                continue;
            }
            let w = *w_group.get_or_insert_with(|| weight(level[i], count));
            for (j, x) in sample.row(i).iter().enumerate() {
                xc[j] = x - xbar[j] - s1[j] / cnt;
                psi[j] += w * xc[j];
            }
            if want_sigma {
                let w2 = w * w;
                for j in 0..p {
                    let mj = s1[j] / cnt;
                    for k in 0..=j {
                        let h = s2[j * p + k] / cnt - mj * (s1[k] / cnt);
                        sig[j * p + k] += w2 * h;
                    }
                }
            }
        }
        end = start;
    }
    let sigma = want_sigma.then(|| {
        let mut m = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in 0..=j {
                let v = sig[j * p + k] / n as f64;
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
        m
    });
    (psi, sigma)
}

fn risk_averages(sample: &CensoredSample, view: &ResidualView, fail: &[bool]) -> RiskAverages {
    let n = sample.n();
    let p = sample.p();
    let nf = n as f64;
    let mut out = RiskAverages { u: vec![], theta0: vec![], theta1: vec![], theta2: vec![], xbar_at: vec![] };
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut count = 0usize;
    let groups: Vec<(f64, &[usize])> = view.tie_groups().collect();
    for (u, group) in groups.into_iter().rev() {
        for &i in group {
            let x = sample.row(i);
            for j in 0..p {
                s1[j] += x[j];
                for k in 0..p {
                    s2[j * p + k] += x[j] * x[k];
                }
            }
        }
        count += group.len();
        if group.iter().any(|&i| fail[i]) {
            out.u.push(u);
            out.theta0.push(count as f64 / nf);
            out.theta1.push(s1.iter().map(|v| v / nf).collect());
            out.theta2.push(s2.iter().map(|v| v / nf).collect());
            out.xbar_at.push(s1.iter().map(|v| v / count as f64).collect());
        }
    }
    out.u.reverse();
    out.theta0.reverse();
    out.theta1.reverse();
    out.theta2.reverse();
    out.xbar_at.reverse();
    out
}

/// Wilcoxon variance estimate `(1/(4n)) sum_i Delta_i S(e_i-)^2 H(e_i)`
/// computed directly from the risk averages.
pub fn sigma_wilcoxon_closed_form(ctx: &EstimatingContext<'_>) -> DMatrix<f64> {
    let sample = ctx.sample();
    let p = sample.p();
    let ra = ctx.risk_averages();
    let mut m = DMatrix::zeros(p, p);
    for (k, &u) in ra.u.iter().enumerate() {
        let d = ctx
            .view()
            .e
            .iter()
            .zip(&ctx.view().delta_mod)
            .filter(|(e, &f)| f && **e == u)
            .count() as f64;
        let s = ctx.cdf().survival_minus(u);
        let t0 = ra.theta0[k];
        for a in 0..p {
            for b in 0..p {
                let h = ra.theta2[k][a * p + b] / t0 - ra.xbar_at[k][a] * ra.xbar_at[k][b];
                m[(a, b)] += d * s * s * h;
            }
        }
    }
    m / (4.0 * sample.n() as f64)
}
