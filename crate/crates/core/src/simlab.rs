//! Simulation laboratory: the Weibull/log-normal-censoring design, replication
//! campaigns with Table-1 style summaries, power and coverage curves, and
//! Monte Carlo checks of the population rank moments and of the `Sigma`
//! decomposition.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::fit::huang_config;
use crate::rankest::{evaluate, Method};
use crate::scores::ScoreSpec;
use crate::solver::{fit_beta, RankEquation, SolverConfig};
use crate::varinf::{ci, omega_huang, quasi_score_test, sigma_hat, wald};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_9;

/// A named estimating method. `score` is a CLI score name or `gehan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimMethod {
    pub label: String,
    pub score: String,
}

impl SimMethod {
    pub fn new(label: &str, score: &str) -> Self {
        Self { label: label.into(), score: score.into() }
    }

    pub fn resolve(&self, n: usize) -> Result<Method> {
        if self.score.trim().eq_ignore_ascii_case("gehan") {
            return Ok(Method::Gehan);
        }
        Ok(Method::Rank(ScoreSpec::parse(&self.score)?.build(n)?))
    }
}

/// The six methods compared in the reference study.
pub fn paper_methods() -> Vec<SimMethod> {
    vec![
        SimMethod::new("raft.NoW", "wilcoxon"),
        SimMethod::new("raft.WW", "logrank"),
        SimMethod::new("raft.WF1", "genf:m1=1,m2=10"),
        SimMethod::new("raft.WF2", "genf:m1=10,m2=1"),
        SimMethod::new("raft.WF3", "genf:m1=3,m2=3"),
        SimMethod::new("fraft", "gehan"),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompConfig {
    pub enabled: bool,
    /// `(X, E)` and `u` draws per batch for the population integrals.
    pub draws: usize,
    pub batches: usize,
    /// Replicate samples for the empirical variance of `n^{-1/2} Psi(beta0)`.
    pub replicates: usize,
    pub b: f64,
}

impl Default for DecompConfig {
    fn default() -> Self {
        Self { enabled: false, draws: 20_000, batches: 20, replicates: 4000, b: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimDesign {
    pub n: usize,
    pub reps: usize,
    /// `beta0 = b (1, -1)` for each grid point.
    pub b_grid: Vec<f64>,
    pub weibull_shape: f64,
    pub censor_mu: f64,
    pub censor_sd: f64,
    pub methods: Vec<SimMethod>,
    pub seed: u64,
    /// Nominal confidence levels for coverage.
    pub levels: Vec<f64>,
    /// Significance level for the power table.
    pub test_level: f64,
    /// Check the censoring rate at `beta0 = 0` and switch to the variance
    /// reading of `censor_sd` if the standard-deviation reading misses 34% +- 2%.
    pub calibrate_censoring: bool,
    pub solver: SolverConfig,
    pub decomp: DecompConfig,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self {
            n: 200,
            reps: 500,
            b_grid: (0..21).map(|k| -1.0 + 0.1 * k as f64).collect(),
            weibull_shape: 0.5,
            censor_mu: 1.5,
            censor_sd: 2.0,
            methods: paper_methods(),
            seed: 20_241_014,
            levels: vec![0.8, 0.9, 0.95],
            test_level: 0.05,
            calibrate_censoring: false,
            solver: SolverConfig::default(),
            decomp: DecompConfig::default(),
        }
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, why: &str| Err(Error::InvalidConfig(format!("{k}: {why}")));
        if self.n < 20 {
            return bad("n", "must be at least 20");
        }
        if self.reps < 1 {
            return bad("reps", "must be at least 1");
        }
        if !(self.weibull_shape > 0.0) {
            return bad("weibull_shape", "must be positive");
        }
        if !(self.censor_sd > 0.0) {
            return bad("censor_sd", "must be positive");
        }
        if self.censor_mu.is_nan() {
            return bad("censor_mu", "must be a number");
        }
        if self.b_grid.iter().any(|b| !b.is_finite()) {
            return bad("b_grid", "entries must be finite");
        }
        if self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad("levels", "entries must lie in (0, 1)");
        }
        if !(self.test_level > 0.0 && self.test_level < 1.0) {
            return bad("test_level", "must lie in (0, 1)");
        }
        for (i, m) in self.methods.iter().enumerate() {
            m.resolve(self.n).map_err(|e| Error::InvalidConfig(format!("methods[{i}].score: {e}")))?;
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn beta0(b: f64) -> Vec<f64> {
        vec![b, -b]
    }

    /// True survivor function of the error `log T - x'beta0`.
    pub fn error_survival(&self, u: f64) -> f64 {
        (-(self.weibull_shape * u - EULER_GAMMA).exp()).exp()
    }

    /// Error quantile at probability `q` (inverse of `1 - error_survival`).
    pub fn error_quantile(&self, q: f64) -> f64 {
        ((-(-q).ln_1p()).ln() + EULER_GAMMA) / self.weibull_shape
    }
}

/// Replicate-level RNG keyed by `(seed, cell, replicate)`; campaigns use the
/// bit pattern of `b` as the cell key.
pub fn stream_rng(seed: u64, cell: u64, rep: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&cell.to_le_bytes());
    key[16..24].copy_from_slice(&rep.to_le_bytes());
    key[24..].copy_from_slice(b"rankaft!");
    ChaCha8Rng::from_seed(key)
}

/// Draws covariates `(X_1, X_2)` with `X_1 ~ Bernoulli(1/2)` and
/// `X_2 = Z + X_1 / 2`.
pub fn draw_covariates<R: Rng>(rng: &mut R) -> [f64; 2] {
    let x1 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    let z: f64 = StandardNormal.sample(rng);
    [x1, z + 0.5 * x1]
}

/// Draws the error `log T* - x'beta0` (mean zero).
pub fn draw_error<R: Rng>(design: &SimDesign, rng: &mut R) -> f64 {
    let e: f64 = -(1.0 - rng.random::<f64>()).ln();
    (e.ln() + EULER_GAMMA) / design.weibull_shape
}

fn draw_log_censor<R: Rng>(design: &SimDesign, rng: &mut R) -> f64 {
    if design.censor_mu == f64::INFINITY {
        return f64::INFINITY;
    }
    Normal::new(design.censor_mu, design.censor_sd).unwrap().sample(rng)
}

/// One sample of size `design.n` on the log-time scale.
pub fn generate<R: Rng>(design: &SimDesign, beta0: &[f64], rng: &mut R) -> CensoredSample {
    let n = design.n;
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let xi = draw_covariates(rng);
        let lt = xi[0] * beta0[0] + xi[1] * beta0[1] + draw_error(design, rng);
        let lc = draw_log_censor(design, rng);
        y.push(lt.min(lc));
        delta.push(lt <= lc);
        x.extend_from_slice(&xi);
    }
    CensoredSample::from_flat(y, delta, x, 2).expect("generated sample is valid")
}

/// Censoring rate at `beta0 = (0, 0)` over `draws` draws.
pub fn censoring_rate(design: &SimDesign, draws: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, u64::MAX, 0);
    let mut censored = 0usize;
    for _ in 0..draws {
        let _ = draw_covariates(&mut rng);
        if draw_error(design, &mut rng) > draw_log_censor(design, &mut rng) {
            censored += 1;
        }
    }
    censored as f64 / draws as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub b: f64,
    pub rep: usize,
    pub method: String,
    pub error: Option<String>,
    pub censoring_rate: f64,
    pub beta_hat: Vec<f64>,
    /// `Psi(beta0) / n`.
    pub psi0: Vec<f64>,
    /// Diagonal of `Sigma_hat(beta_hat) / n`.
    pub sigma_diag: Vec<f64>,
    /// Diagonal of `Omega_hat / n`.
    pub omega_diag: Vec<f64>,
    pub qs_p_zero: f64,
    pub wald_p_zero: f64,
    pub qs_p_truth: f64,
    pub wald_p_truth: f64,
    /// `covered[level][coord]`.
    pub covered: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub b: f64,
    pub beta0: Vec<f64>,
    pub method: String,
    pub reps_ok: usize,
    pub failures: BTreeMap<String, usize>,
    pub censoring_rate: f64,
    pub emp_var_psi: Vec<f64>,
    pub mean_sigma_hat: Vec<f64>,
    pub bias: Vec<f64>,
    pub emp_var_beta: Vec<f64>,
    pub mean_omega_hat: Vec<f64>,
    pub reject_qs_zero: f64,
    pub reject_wald_zero: f64,
    pub reject_qs_truth: f64,
    pub reject_wald_truth: f64,
    /// `coverage[level][coord]`.
    pub coverage: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub design: SimDesign,
    pub cells: Vec<CellSummary>,
    pub records: Vec<ReplicateRecord>,
    pub notes: Vec<String>,
}

impl SimReport {
    pub fn cell(&self, b: f64, method: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.b == b && c.method == method)
    }
}

fn replicate_fit(
    sample: &CensoredSample,
    method: &Method,
    beta0: &[f64],
    design: &SimDesign,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, [f64; 4], Vec<Vec<bool>>)> {
    let n = sample.n();
    let nf = n as f64;
    let outcome = fit_beta(sample, method, &design.solver)?;
    let beta_hat = outcome.beta_hat;
    let sigma = sigma_hat(sample, method, &beta_hat)?;
    let eq = RankEquation::new(sample, method.clone());
    let hcfg = huang_config(&design.solver, n, &sigma.matrix);
    let omega = omega_huang(&eq, &beta_hat, &sigma.matrix, &hcfg)?;
    let zero = vec![0.0; beta0.len()];
    let pv = [
        quasi_score_test(sample, method, &zero)?.p_value,
        wald(&beta_hat, &omega.matrix, n, &zero)?.p_value,
        quasi_score_test(sample, method, beta0)?.p_value,
        wald(&beta_hat, &omega.matrix, n, beta0)?.p_value,
    ];
    let mut covered = Vec::with_capacity(design.levels.len());
    for &level in &design.levels {
        let iv = ci(&beta_hat, &omega.matrix, n, level)?;
        covered.push((0..beta0.len()).map(|k| iv.lower[k] <= beta0[k] && beta0[k] <= iv.upper[k]).collect());
    }
    let sd: Vec<f64> = (0..beta0.len()).map(|k| sigma.matrix[(k, k)] / nf).collect();
    let od: Vec<f64> = (0..beta0.len()).map(|k| omega.matrix[(k, k)] / nf).collect();
    Ok((beta_hat, sd, od, pv, covered))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Runs every method on every `(b, replicate)` dataset and summarises.
pub fn run_campaign(design: &SimDesign) -> Result<SimReport> {
    design.validate()?;
    let methods: Vec<Method> = design.methods.iter().map(|m| m.resolve(design.n)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..design.b_grid.len()).flat_map(|c| (0..design.reps).map(move |r| (c, r))).collect();
    let per_job: Vec<Vec<ReplicateRecord>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let b = design.b_grid[c];
            let beta0 = SimDesign::beta0(b);
            let mut rng = stream_rng(design.seed, b.to_bits(), r as u64);
            let sample = generate(design, &beta0, &mut rng);
            let cens = sample.censoring_rate();
            methods
                .iter()
                .zip(&design.methods)
                .map(|(m, sm)| {
                    let psi0 = evaluate(&sample, m, &beta0, false)
                        .map(|(v, _)| v.iter().map(|x| x / design.n as f64).collect())
                        .unwrap_or_default();
                    let mut rec = ReplicateRecord {
                        b,
                        rep: r,
                        method: sm.label.clone(),
                        error: None,
                        censoring_rate: cens,
                        beta_hat: vec![],
                        psi0,
                        sigma_diag: vec![],
                        omega_diag: vec![],
                        qs_p_zero: f64::NAN,
                        wald_p_zero: f64::NAN,
                        qs_p_truth: f64::NAN,
                        wald_p_truth: f64::NAN,
                        covered: vec![],
                    };
                    match replicate_fit(&sample, m, &beta0, design) {
                        Ok((bh, sd, od, pv, cov)) => {
                            rec.beta_hat = bh;
                            rec.sigma_diag = sd;
                            rec.omega_diag = od;
                            [rec.qs_p_zero, rec.wald_p_zero, rec.qs_p_truth, rec.wald_p_truth] = pv;
                            rec.covered = cov;
                        }
                        Err(e) => rec.error = Some(e.code().to_string()),
                    }
                    rec
                })
                .collect()
        })
        .collect();
    let records: Vec<ReplicateRecord> = per_job.into_iter().flatten().collect();
    let mut cells = Vec::new();
    for &b in &design.b_grid {
        for sm in &design.methods {
            cells.push(summarise(design, b, &sm.label, &records));
        }
    }
    Ok(SimReport { design: design.clone(), cells, records, notes: vec![] })
}

fn summarise(design: &SimDesign, b: f64, label: &str, records: &[ReplicateRecord]) -> CellSummary {
    let beta0 = SimDesign::beta0(b);
    let all: Vec<&ReplicateRecord> = records.iter().filter(|r| r.b == b && r.method == label).collect();
    let mut failures = BTreeMap::new();
    for r in &all {
        if let Some(e) = &r.error {
            *failures.entry(e.clone()).or_insert(0) += 1;
        }
    }
    let ok: Vec<&&ReplicateRecord> = all.iter().filter(|r| r.error.is_none()).collect();
    let p = beta0.len();
    let col = |f: &dyn Fn(&ReplicateRecord) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let rate = |v: Vec<f64>| v.iter().filter(|&&p| p < design.test_level).count() as f64 / v.len().max(1) as f64;
    CellSummary {
        b,
        beta0: beta0.clone(),
        method: label.into(),
        reps_ok: ok.len(),
        failures,
        censoring_rate: mean(&all.iter().map(|r| r.censoring_rate).collect::<Vec<_>>()),
        emp_var_psi: (0..p).map(|k| var(&col(&|r| r.psi0[k]))).collect(),
        mean_sigma_hat: (0..p).map(|k| mean(&col(&|r| r.sigma_diag[k]))).collect(),
        bias: (0..p).map(|k| mean(&col(&|r| r.beta_hat[k])) - beta0[k]).collect(),
        emp_var_beta: (0..p).map(|k| var(&col(&|r| r.beta_hat[k]))).collect(),
        mean_omega_hat: (0..p).map(|k| mean(&col(&|r| r.omega_diag[k]))).collect(),
        reject_qs_zero: rate(col(&|r| r.qs_p_zero)),
        reject_wald_zero: rate(col(&|r| r.wald_p_zero)),
        reject_qs_truth: rate(col(&|r| r.qs_p_truth)),
        reject_wald_truth: rate(col(&|r| r.wald_p_truth)),
        coverage: (0..design.levels.len())
            .map(|l| {
                (0..p)
                    .map(|k| ok.iter().filter(|r| r.covered[l][k]).count() as f64 / ok.len().max(1) as f64)
                    .collect()
            })
            .collect(),
    }
}

/// `(b, method, test, rejection rate)` rows for testing `beta = 0`.
pub fn power_curve(report: &SimReport) -> Vec<(f64, String, String, f64)> {
    let mut rows = Vec::new();
    for c in &report.cells {
        rows.push((c.b, c.method.clone(), "quasi_score".to_string(), c.reject_qs_zero));
        rows.push((c.b, c.method.clone(), "wald".to_string(), c.reject_wald_zero));
    }
    rows
}

/// Monte Carlo moments of the population Wilcoxon rank under the true error law.
#[derive(Debug, Clone, Serialize)]
pub struct RankMomentCheck {
    pub draws: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_target: f64,
    /// Mean and standard error of `(R - 1/2)^2 - (1 - S^3(E)) / 12`.
    pub excess: f64,
    pub excess_se: f64,
}

impl RankMomentCheck {
    pub fn passes(&self, k: f64) -> bool {
        (self.mean - 0.5).abs() <= k * self.mean_se && self.excess.abs() <= k * self.excess_se
    }
}

/// Population rank `Delta F(e) + (1 - Delta)(1 - S(c)/2)`, with `c` the
/// censoring residual, against its mean 1/2 and variance `(1 - E S^3(c)) / 12`.
pub fn population_rank_moments(design: &SimDesign, beta0: &[f64], draws: usize, seed: u64) -> RankMomentCheck {
    let mut rng = stream_rng(seed, u64::MAX - 1, 0);
    let mut r = Vec::with_capacity(draws);
    let mut d = Vec::with_capacity(draws);
    let mut s3 = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = draw_covariates(&mut rng);
        let e = draw_error(design, &mut rng);
        let c = draw_log_censor(design, &mut rng) - x[0] * beta0[0] - x[1] * beta0[1];
        let sc = if c == f64::INFINITY { 0.0 } else { design.error_survival(c) };
        let ri = if e <= c { 1.0 - design.error_survival(e) } else { 1.0 - 0.5 * sc };
        r.push(ri);
        s3.push(sc * sc * sc);
        d.push((ri - 0.5) * (ri - 0.5) - (1.0 - sc * sc * sc) / 12.0);
    }
    let nf = draws as f64;
    RankMomentCheck {
        draws,
        mean: mean(&r),
        mean_se: (var(&r) / nf).sqrt(),
        variance: var(&r),
        variance_target: (1.0 - mean(&s3)) / 12.0,
        excess: mean(&d),
        excess_se: (var(&d) / nf).sqrt(),
    }
}

/// Population and empirical pieces of `Sigma = Sigma_1 - Sigma_2` (Wilcoxon).
#[derive(Debug, Clone, Serialize)]
pub struct DecompReport {
    pub censor_mu: f64,
    pub b: f64,
    pub sigma1: Vec<Vec<f64>>,
    pub sigma1_se: Vec<Vec<f64>>,
    pub sigma1_closed: Vec<Vec<f64>>,
    pub sigma1_closed_se: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub sigma2_se: Vec<Vec<f64>>,
    pub difference: Vec<Vec<f64>>,
    pub difference_se: Vec<Vec<f64>>,
    pub sigma_x_over_12: Vec<Vec<f64>>,
    pub sigma_emp: Option<Vec<Vec<f64>>>,
    pub sigma_emp_se: Option<Vec<Vec<f64>>>,
    pub sigma2_min_eigenvalue: f64,
}

impl DecompReport {
    /// `Sigma_1` integral within `k` standard errors of `Sigma_X / 12`.
    pub fn sigma1_matches_sigma_x(&self, k: f64) -> bool {
        all_within(&self.sigma1, &self.sigma_x_over_12, &self.sigma1_se, None, k)
    }

    /// Empirical `Sigma` within `k` combined standard errors of `Sigma_1 - Sigma_2`.
    pub fn empirical_matches(&self, k: f64) -> bool {
        match (&self.sigma_emp, &self.sigma_emp_se) {
            (Some(e), Some(se)) => all_within(e, &self.difference, se, Some(&self.difference_se), k),
            _ => false,
        }
    }

    /// Smallest eigenvalue of `Sigma_2` no lower than `-k` standard errors.
    pub fn sigma2_psd(&self, k: f64) -> bool {
        let se = self.sigma2_se.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        self.sigma2_min_eigenvalue >= -k * se
    }
}

fn all_within(a: &[Vec<f64>], b: &[Vec<f64>], se: &[Vec<f64>], se2: Option<&[Vec<f64>]>, k: f64) -> bool {
    for i in 0..a.len() {
        for j in 0..a[i].len() {
            let s2 = se2.map(|s| s[i][j]).unwrap_or(0.0);
            let s = (se[i][j] * se[i][j] + s2 * s2).sqrt();
            if (a[i][j] - b[i][j]).abs() > k * s {
                return false;
            }
        }
    }
    true
}

const MU_X: [f64; 2] = [0.5, 0.25];
const SIGMA_X: [[f64; 2]; 2] = [[0.25, 0.125], [0.125, 1.0625]];

fn batch_stats(values: &[[f64; 4]]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = values.len() as f64;
    let mut m = vec![vec![0.0; 2]; 2];
    let mut se = vec![vec![0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let v: Vec<f64> = values.iter().map(|x| x[2 * a + b]).collect();
            m[a][b] = mean(&v);
            se[a][b] = (var(&v) / k).sqrt();
        }
    }
    (m, se)
}

/// Estimates `Sigma_1` (integral and closed forms) and `Sigma_2` from their
/// population expressions under the true error and censoring laws, and
/// optionally the empirical variance of `n^{-1/2} Psi(beta0)` for Wilcoxon.
pub fn sigma_decomposition_check(
    design: &SimDesign,
    cfg: &DecompConfig,
    seed: u64,
    with_empirical: bool,
) -> Result<DecompReport> {
    let beta0 = SimDesign::beta0(cfg.b);
    let batches: Vec<([f64; 4], [f64; 4], [f64; 4], [f64; 4])> = (0..cfg.batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, u64::MAX - 2, k as u64);
            let m = cfg.draws;
            let mut xe: Vec<([f64; 2], f64)> = (0..m)
                .map(|_| {
                    let x = draw_covariates(&mut rng);
                    let c = draw_log_censor(design, &mut rng) - x[0] * beta0[0] - x[1] * beta0[1];
                    ([x[0] - MU_X[0], x[1] - MU_X[1]], c)
                })
                .collect();
            let mut closed = [0.0; 4];
            for (x, c) in &xe {
                let s = if *c == f64::INFINITY { 0.0 } else { design.error_survival(*c) };
                let s3 = s * s * s;
                for a in 0..2 {
                    for b in 0..2 {
                        closed[2 * a + b] += x[a] * x[b] * s3;
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    closed[2 * a + b] = SIGMA_X[a][b] / 12.0 - closed[2 * a + b] / (12.0 * m as f64);
                }
            }
            // suffix sums over censoring residuals sorted descending
            xe.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut thresholds = Vec::with_capacity(m);
            let mut s1 = Vec::with_capacity(m);
            let mut s2 = Vec::with_capacity(m);
            let (mut a1, mut a2) = ([0.0; 2], [0.0; 4]);
            for (x, c) in &xe {
                for a in 0..2 {
                    a1[a] += x[a];
                    for b in 0..2 {
                        a2[2 * a + b] += x[a] * x[b];
                    }
                }
                thresholds.push(*c);
                s1.push(a1);
                s2.push(a2);
            }
            let (mut sig1, mut sig2) = ([0.0; 4], [0.0; 4]);
            let mut x_ou = [0.0; 4];
            for _ in 0..m {
                let u = draw_error(design, &mut rng);
                let s = design.error_survival(u);
                // number of draws with E >= u
                let cnt = thresholds.partition_point(|&c| c >= u);
                if cnt == 0 {
                    continue;
                }
                let p = cnt as f64 / m as f64;
                let m1 = [s1[cnt - 1][0] / m as f64, s1[cnt - 1][1] / m as f64];
                for a in 0..2 {
                    for b in 0..2 {
                        sig1[2 * a + b] += 0.25 * s * s * s2[cnt - 1][2 * a + b] / m as f64;
                        sig2[2 * a + b] += 0.25 * s * s * m1[a] * m1[b] / p;
                    }
                }
            }
            for v in 0..4 {
                sig1[v] /= m as f64;
                sig2[v] /= m as f64;
                x_ou[v] = sig1[v] - sig2[v];
            }
            (sig1, closed, sig2, x_ou)
        })
        .collect();
    let (sigma1, sigma1_se) = batch_stats(&batches.iter().map(|b| b.0).collect::<Vec<_>>());
    let (sigma1_closed, sigma1_closed_se) = batch_stats(&batches.iter().map(|b| b.1).collect::<Vec<_>>());
    let (sigma2, sigma2_se) = batch_stats(&batches.iter().map(|b| b.2).collect::<Vec<_>>());
    let (difference, difference_se) = batch_stats(&batches.iter().map(|b| b.3).collect::<Vec<_>>());
    let s2m = DMatrix::from_fn(2, 2, |i, j| sigma2[i][j]);
    let sigma2_min_eigenvalue = SymmetricEigen::new(s2m).eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    let (sigma_emp, sigma_emp_se) = if with_empirical {
        let method = Method::Rank(crate::scores::ScoreFunction::wilcoxon());
        let vals: Vec<Result<[f64; 2]>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(seed, u64::MAX - 3, r as u64);
                let sample = generate(design, &beta0, &mut rng);
                let (psi, _) = evaluate(&sample, &method, &beta0, false)?;
                let sq = (design.n as f64).sqrt();
                Ok([psi[0] / sq, psi[1] / sq])
            })
            .collect();
        let vals: Vec<[f64; 2]> = vals.into_iter().collect::<Result<_>>()?;
        let r = vals.len() as f64;
        let mu = [mean(&vals.iter().map(|v| v[0]).collect::<Vec<_>>()), mean(&vals.iter().map(|v| v[1]).collect::<Vec<_>>())];
        let mut e = vec![vec![0.0; 2]; 2];
        let mut se = vec![vec![0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let prods: Vec<f64> = vals.iter().map(|v| (v[a] - mu[a]) * (v[b] - mu[b])).collect();
                e[a][b] = prods.iter().sum::<f64>() / (r - 1.0);
                se[a][b] = (var(&prods) / r).sqrt();
            }
        }
        (Some(e), Some(se))
    } else {
        (None, None)
    };
    Ok(DecompReport {
        censor_mu: design.censor_mu,
        b: cfg.b,
        sigma1,
        sigma1_se,
        sigma1_closed,
        sigma1_closed_se,
        sigma2,
        sigma2_se,
        difference,
        difference_se,
        sigma_x_over_12: SIGMA_X.iter().map(|r| r.iter().map(|v| v / 12.0).collect()).collect(),
        sigma_emp,
        sigma_emp_se,
        sigma2_min_eigenvalue,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `table1.csv`, `power.csv`, `coverage.csv`, optional `decomp.json`
/// and `manifest.json` into `dir`.
pub fn write_outputs(report: &SimReport, decomp: Option<&DecompReport>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut t = csv::Writer::from_path(dir.join("table1.csv"))?;
    t.write_record([
        "b", "method", "reps_ok", "failures", "censoring_rate", "emp_var_psi_1", "emp_var_psi_2", "mean_sigma_1",
        "mean_sigma_2", "bias_1", "bias_2", "emp_var_beta_1", "emp_var_beta_2", "mean_omega_1", "mean_omega_2",
    ])?;
    for c in &report.cells {
        let failures: usize = c.failures.values().sum();
        let mut row = vec![fmt(c.b), c.method.clone(), c.reps_ok.to_string(), failures.to_string(), fmt(c.censoring_rate)];
        for v in [&c.emp_var_psi, &c.mean_sigma_hat, &c.bias, &c.emp_var_beta, &c.mean_omega_hat] {
            row.extend(v.iter().map(|x| fmt(*x)));
        }
        t.write_record(&row)?;
    }
    t.flush()?;

    let mut pw = csv::Writer::from_path(dir.join("power.csv"))?;
    pw.write_record(["b", "method", "test", "rejection_rate"])?;
    for (b, m, test, r) in power_curve(report) {
        pw.write_record([fmt(b), m, test, fmt(r)])?;
    }
    pw.flush()?;

    let mut cv = csv::Writer::from_path(dir.join("coverage.csv"))?;
    cv.write_record(["b", "method", "level", "coordinate", "coverage"])?;
    for c in &report.cells {
        for (l, level) in report.design.levels.iter().enumerate() {
            for (k, v) in c.coverage[l].iter().enumerate() {
                cv.write_record([fmt(c.b), c.method.clone(), fmt(*level), (k + 1).to_string(), fmt(*v)])?;
            }
        }
    }
    cv.flush()?;

    if let Some(d) = decomp {
        fs::write(dir.join("decomp.json"), serde_json::to_string_pretty(d)?)?;
    }
    let manifest = serde_json::json!({
        "seed": report.design.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "design": report.design,
        "notes": report.notes,
    });
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(())
}

/// Resolves the censoring-scale reading, runs the campaign and the optional
/// decomposition check, and writes all outputs.
pub fn simulate(design: &SimDesign, out: &Path) -> Result<SimReport> {
    let mut design = design.clone();
    let mut notes = vec![
        "covariate columns: x1 ~ Bernoulli(0.5), x2 = Z + x1/2".to_string(),
        format!("beta0 = b (1, -1) over {} grid points", design.b_grid.len()),
    ];
    if design.calibrate_censoring {
        let rate = censoring_rate(&design, 100_000, design.seed);
        if (rate - 0.34).abs() <= 0.02 {
            notes.push(format!("censor_sd read as a standard deviation (censoring rate {rate:.4} at beta0 = 0)"));
        } else {
            let sd = design.censor_sd.sqrt();
            notes.push(format!(
                "standard-deviation reading gave censoring rate {rate:.4}; censor_sd read as a variance (sd {sd})"
            ));
            design.censor_sd = sd;
        }
    }
    let mut report = run_campaign(&design)?;
    report.notes = notes;
    let decomp = if design.decomp.enabled {
        Some(sigma_decomposition_check(&design, &design.decomp, design.seed, true)?)
    } else {
        None
    };
    write_outputs(&report, decomp.as_ref(), out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_law_has_mean_zero_and_matches_survival() {
        let d = SimDesign::default();
        let mut rng = stream_rng(1, 2, 3);
        let e: Vec<f64> = (0..100_000).map(|_| draw_error(&d, &mut rng)).collect();
        let se = (var(&e) / e.len() as f64).sqrt();
        assert!(mean(&e).abs() < 4.0 * se);
        let q = d.error_quantile(0.3);
        let frac = e.iter().filter(|&&v| v <= q).count() as f64 / e.len() as f64;
        assert!((frac - 0.3).abs() < 0.01);
        assert!((d.error_survival(q) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn censoring_rates() {
        let d = SimDesign::default();
        let r = censoring_rate(&d, 100_000, 5);
        assert!((r - 0.34).abs() < 0.01, "{r}");
        let unc = SimDesign { censor_mu: f64::INFINITY, ..SimDesign::default() };
        assert_eq!(censoring_rate(&unc, 1000, 5), 0.0);
    }

    #[test]
    fn streams_are_reproducible() {
        let d = SimDesign::default();
        let a = generate(&d, &[1.0, -1.0], &mut stream_rng(9, 0, 4));
        let b = generate(&d, &[1.0, -1.0], &mut stream_rng(9, 0, 4));
        let c = generate(&d, &[1.0, -1.0], &mut stream_rng(9, 0, 5));
        assert_eq!(a.y(), b.y());
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn small_campaign_runs() {
        let d = SimDesign {
            n: 40,
            reps: 3,
            b_grid: vec![0.0, 1.0],
            methods: vec![SimMethod::new("raft.NoW", "wilcoxon"), SimMethod::new("fraft", "gehan")],
            ..SimDesign::default()
        };
        let r = run_campaign(&d).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.records.len(), 12);
        let again = run_campaign(&d).unwrap();
        assert_eq!(
            serde_json::to_string(&r.records).unwrap(),
            serde_json::to_string(&again.records).unwrap()
        );
    }

    #[test]
    fn design_validation() {
        assert!(SimDesign { n: 5, ..SimDesign::default() }.validate().is_err());
        let bad = SimDesign { methods: vec![SimMethod::new("x", "nope")], ..SimDesign::default() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("methods[0].score"), "{msg}");
    }
}
