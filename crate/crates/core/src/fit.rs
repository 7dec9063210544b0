//! End-to-end fitting: solve, estimate variances, test and build intervals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::rankest::Method;
use crate::solver::{fit_beta, RankEquation, SolveOutcome, SolverConfig};
use crate::varinf::{
    ci, omega_huang, omega_monte_carlo, quasi_score_test, sigma_hat, wald, Interval, OmegaDiagnostics, OmegaMethod,
    TestResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DzChoice {
    /// `diag(Omega_huang)` from a first Huang pass.
    Scale,
    Identity,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub method: Method,
    pub variance: OmegaMethod,
    pub mc_reps: usize,
    pub dz: DzChoice,
    pub seed: u64,
    pub level: f64,
    /// Null hypothesis for the reported tests; defaults to zero.
    pub null: Option<Vec<f64>>,
    pub solver: SolverConfig,
    /// Solver settings for the Huang offset equations.
    pub huang_solver: Option<SolverConfig>,
}

impl FitOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            variance: OmegaMethod::Huang,
            mc_reps: 500,
            dz: DzChoice::Scale,
            seed: 0,
            level: 0.95,
            null: None,
            solver: SolverConfig::default(),
            huang_solver: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceInfo {
    pub variance: OmegaMethod,
    pub diagnostics: OmegaDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreInfo {
    pub label: String,
    pub bounds: Option<(f64, f64)>,
}

/// The fit report; serialises to the documented JSON layout.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub sigma_hat: Option<Vec<Vec<f64>>>,
    pub omega_hat: Option<Vec<Vec<f64>>>,
    pub method: VarianceInfo,
    pub tests: Vec<TestResult>,
    pub ci: Option<Interval>,
    pub solver: SolveOutcome,
    pub score: ScoreInfo,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn score_info(method: &Method) -> ScoreInfo {
    ScoreInfo { label: method.label(), bounds: method.score().map(|s| s.bounds()) }
}

/// Default Huang settings: same acceptance rule, brackets started at the
/// standard-error scale.
pub fn huang_config(base: &SolverConfig, n: usize, sigma: &DMatrix<f64>) -> SolverConfig {
    let d = (0..sigma.nrows()).fold(0.0f64, |m, k| m.max(sigma[(k, k)]));
    SolverConfig { scale: Some(if d > 0.0 { d.sqrt() } else { 1.0 }), ..base.clone() }
        .with_default_bracket((1.0 / n as f64).sqrt())
}

impl SolverConfig {
    fn with_default_bracket(mut self, b: f64) -> Self {
        if self.bracket_init.is_none() {
            self.bracket_init = Some(b);
        }
        self
    }
}

/// Fits the model. A non-converged solve is returned as
/// `Error::NotConverged` carrying the solver diagnostics.
pub fn fit(sample: &CensoredSample, opts: &FitOptions) -> Result<FitResult> {
    sample.check_design()?;
    let outcome = fit_beta(sample, &opts.method, &opts.solver)?;
    let n = sample.n();
    let p = sample.p();
    let beta_hat = outcome.beta_hat.clone();
    let sigma = sigma_hat(sample, &opts.method, &beta_hat)?;
    let eq = RankEquation::new(sample, opts.method.clone());
    let hcfg = opts.huang_solver.clone().unwrap_or_else(|| huang_config(&opts.solver, n, &sigma.matrix));
    let huang = omega_huang(&eq, &beta_hat, &sigma.matrix, &hcfg)?;
    let omega = match opts.variance {
        OmegaMethod::Huang => huang,
        OmegaMethod::MonteCarlo => {
            let dz = match opts.dz {
                DzChoice::Identity => DMatrix::identity(p, p),
                DzChoice::Scale => {
                    let d = huang.matrix.diagonal().map(|v| if v > 0.0 { v } else { 1.0 });
                    DMatrix::from_diagonal(&d)
                }
            };
            omega_monte_carlo(&eq, &beta_hat, &sigma.matrix, opts.mc_reps, &dz, opts.seed)?
        }
    };
    let null = opts.null.clone().unwrap_or_else(|| vec![0.0; p]);
    if null.len() != p {
        return Err(Error::InvalidConfig(format!("null hypothesis must have length {p}")));
    }
    let tests = vec![
        quasi_score_test(sample, &opts.method, &null)?,
        wald(&beta_hat, &omega.matrix, n, &null)?,
    ];
    let interval = ci(&beta_hat, &omega.matrix, n, opts.level)?;
    Ok(FitResult {
        beta_hat,
        sigma_hat: Some(matrix_rows(&sigma.matrix)),
        omega_hat: Some(matrix_rows(&omega.matrix)),
        method: VarianceInfo { variance: omega.method, diagnostics: omega.diagnostics },
        tests,
        ci: Some(interval),
        solver: outcome,
        score: score_info(&opts.method),
    })
}

/// Report for a solve that did not converge: the point estimate and solver
/// diagnostics without variance estimates.
pub fn partial_report(opts: &FitOptions, outcome: SolveOutcome) -> FitResult {
    FitResult {
        beta_hat: outcome.beta_hat.clone(),
        sigma_hat: None,
        omega_hat: None,
        method: VarianceInfo { variance: opts.variance, diagnostics: OmegaDiagnostics::default() },
        tests: vec![],
        ci: None,
        solver: outcome,
        score: score_info(&opts.method),
    }
}
