//! Variance estimation for `Psi` and `beta_hat`, and the resulting tests and
//! confidence intervals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::rankest::{evaluate, Method};
use crate::solver::{solve_offset, EstimatingFunction, SolveOutcome, SolverConfig};
use crate::special::{chi2_sf, norm_quantile};

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SigmaHat {
    pub matrix: DMatrix<f64>,
    pub at_beta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMethod {
    Huang,
    MonteCarlo,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OmegaDiagnostics {
    /// Huang: per column, `both`, `upper` or `lower` depending on which offset solves succeeded.
    pub columns: Vec<String>,
    /// Monte Carlo: per-component regression R^2.
    pub r_squared: Vec<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone)]
pub struct OmegaHat {
    pub matrix: DMatrix<f64>,
    pub method: OmegaMethod,
    pub diagnostics: OmegaDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    QuasiScore,
    Wald,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub null: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Symmetrises and clamps negative eigenvalue noise to zero.
pub fn clamp_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    let out = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Symmetric square root via eigendecomposition, eigenvalues clamped at 0.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let out = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Condition number of a symmetric matrix (infinite if not positive definite).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let max = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `Sigma_hat(beta)` for a method.
pub fn sigma_hat(sample: &CensoredSample, method: &Method, beta: &[f64]) -> Result<SigmaHat> {
    let (_, sigma) = evaluate(sample, method, beta, true)?;
    Ok(SigmaHat { matrix: clamp_psd(&sigma.unwrap()), at_beta: beta.to_vec() })
}

fn quadratic_form(m: &DMatrix<f64>, v: &[f64]) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let v = DVector::from_column_slice(v);
    let sol = chol.solve(&v);
    Some(v.dot(&sol))
}

/// `n^{-1} Psi(b0)' Sigma_hat(b0)^{-1} Psi(b0)` with a chi-square tail.
pub fn quasi_score_test(sample: &CensoredSample, method: &Method, beta_null: &[f64]) -> Result<TestResult> {
    let (psi, sigma) = evaluate(sample, method, beta_null, true)?;
    let sigma = clamp_psd(&sigma.unwrap());
    let p = psi.len();
    let stat = if psi.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        let condition = condition_number(&sigma);
        if condition > MAX_CONDITION {
            return Err(Error::SingularSigma { condition });
        }
        let q = quadratic_form(&sigma, &psi).ok_or(Error::SingularSigma { condition })?;
        q / sample.n() as f64
    };
    Ok(TestResult { kind: TestKind::QuasiScore, statistic: stat, df: p, p_value: chi2_sf(stat, p), null: beta_null.to_vec() })
}

/// `n (beta_hat - b0)' Omega^{-1} (beta_hat - b0)`.
pub fn wald(beta_hat: &[f64], omega: &DMatrix<f64>, n: usize, beta_null: &[f64]) -> Result<TestResult> {
    let d: Vec<f64> = beta_hat.iter().zip(beta_null).map(|(a, b)| a - b).collect();
    let p = d.len();
    let stat = if d.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        if condition_number(omega) > MAX_CONDITION {
            return Err(Error::SingularOmega);
        }
        n as f64 * quadratic_form(omega, &d).ok_or(Error::SingularOmega)?
    };
    Ok(TestResult { kind: TestKind::Wald, statistic: stat, df: p, p_value: chi2_sf(stat, p), null: beta_null.to_vec() })
}

/// Marginal intervals `beta_hat_k +- z sqrt(Omega_kk / n)`.
pub fn ci(beta_hat: &[f64], omega: &DMatrix<f64>, n: usize, level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let z = norm_quantile(0.5 + 0.5 * level);
    let mut lower = Vec::with_capacity(beta_hat.len());
    let mut upper = Vec::with_capacity(beta_hat.len());
    for (k, b) in beta_hat.iter().enumerate() {
        let v = omega[(k, k)];
        if !(v > 0.0) {
            return Err(Error::SingularOmega);
        }
        let half = z * (v / n as f64).sqrt();
        lower.push(b - half);
        upper.push(b + half);
    }
    Ok(Interval { level, lower, upper })
}

/// Huang's inverse numerical differentiation: solve `Psi/n = +-C_k` with
/// `C = (Sigma/n)^{1/2}` and set `Omega = n B B'`.
pub fn omega_huang<F: EstimatingFunction>(
    f: &F,
    beta_hat: &[f64],
    sigma: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<OmegaHat> {
    let p = f.dim();
    let n = f.n() as f64;
    let c = sym_sqrt(&(sigma / n));
    let jobs: Vec<(usize, f64)> = (0..p).flat_map(|k| [(k, 1.0), (k, -1.0)]).collect();
    let solutions: Vec<Option<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(k, s)| {
            let target: Vec<f64> = (0..p).map(|j| s * c[(j, k)]).collect();
            solve_offset(f, beta_hat, config, &target).ok().map(|o| o.beta_hat)
        })
        .collect();
    let mut b = DMatrix::zeros(p, p);
    let mut columns = Vec::with_capacity(p);
    for k in 0..p {
        let (up, lo) = (&solutions[2 * k], &solutions[2 * k + 1]);
        let (col, tag): (Vec<f64>, &str) = match (up, lo) {
            (Some(u), Some(l)) => (u.iter().zip(l).map(|(a, b)| 0.5 * (a - b)).collect(), "both"),
            (Some(u), None) => (u.iter().zip(beta_hat).map(|(a, b)| a - b).collect(), "upper"),
            (None, Some(l)) => (beta_hat.iter().zip(l).map(|(a, b)| a - b).collect(), "lower"),
            (None, None) => return Err(Error::NoSolutionEitherSide(k)),
        };
        for j in 0..p {
            b[(j, k)] = col[j];
        }
        columns.push(tag.to_string());
    }
    let m = &b * b.transpose() * n;
    let matrix = (&m + m.transpose()) * 0.5;
    Ok(OmegaHat { matrix, method: OmegaMethod::Huang, diagnostics: OmegaDiagnostics { columns, ..Default::default() } })
}

/// Monte Carlo slope estimation: regress `n^{-1/2} Psi(beta_hat + Z/sqrt(n))`
/// on `Z ~ N(0, D_Z)`, symmetrise the slope and return `Xi^{-1} Sigma Xi^{-1}`.
pub fn omega_monte_carlo<F: EstimatingFunction>(
    f: &F,
    beta_hat: &[f64],
    sigma: &DMatrix<f64>,
    reps: usize,
    dz: &DMatrix<f64>,
    seed: u64,
) -> Result<OmegaHat> {
    let p = f.dim();
    let n = f.n() as f64;
    let chol = dz
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("D_Z must be symmetric positive definite".into()))?;
    let l = chol.l();
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let e = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut rng)));
            let z = &l * e;
            let beta: Vec<f64> = (0..p).map(|j| beta_hat[j] + z[j] / n.sqrt()).collect();
            let psi = f.eval(&beta)?;
            Ok((z.iter().copied().collect(), psi.iter().map(|v| v / n.sqrt()).collect()))
        })
        .collect();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let mut zm = DMatrix::from_fn(reps, p, |b, j| rows[b].0[j]);
    let mut ym = DMatrix::from_fn(reps, p, |b, j| rows[b].1[j]);
    for j in 0..p {
        let mz = zm.column(j).mean();
        let my = ym.column(j).mean();
        zm.column_mut(j).add_scalar_mut(-mz);
        ym.column_mut(j).add_scalar_mut(-my);
    }
    let ztz = zm.transpose() * &zm;
    let singular = |condition: f64| Error::SingularXi { condition, r_squared: 0.0 };
    let ztz_cond = condition_number(&ztz);
    if reps <= p || ztz_cond > MAX_CONDITION {
        return Err(singular(ztz_cond));
    }
    let coef = ztz.cholesky().ok_or_else(|| singular(ztz_cond))?.solve(&(zm.transpose() * &ym));
    // ym ~ zm * coef, so the slope of component j on Z is column j of coef
    let xi_tilde = coef.transpose();
    let xi = (&xi_tilde + xi_tilde.transpose()) * 0.5;
    let fitted = &zm * &coef;
    let r_squared: Vec<f64> = (0..p)
        .map(|j| {
            let sst = ym.column(j).norm_squared();
            let sse = (ym.column(j) - fitted.column(j)).norm_squared();
            if sst > 0.0 {
                1.0 - sse / sst
            } else {
                0.0
            }
        })
        .collect();
    let min_r2 = r_squared.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let eig = SymmetricEigen::new(xi.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = abs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::SingularXi { condition, r_squared: min_r2 });
    }
    let xi_inv = xi.try_inverse().ok_or(Error::SingularXi { condition, r_squared: min_r2 })?;
    let m = &xi_inv * sigma * &xi_inv;
    let matrix = (&m + m.transpose()) * 0.5;
    Ok(OmegaHat {
        matrix,
        method: OmegaMethod::MonteCarlo,
        diagnostics: OmegaDiagnostics { r_squared, replicates: reps, ..Default::default() },
    })
}

/// Convenience wrapper bundling a fitted outcome.
pub fn omega_huang_for(
    f: &impl EstimatingFunction,
    fit: &SolveOutcome,
    sigma: &SigmaHat,
    config: &SolverConfig,
) -> Result<OmegaHat> {
    omega_huang(f, &fit.beta_hat, &sigma.matrix, config)
}
