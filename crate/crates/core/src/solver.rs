//! Sequential univariate bisection for zero crossings of a step-valued,
//! possibly non-monotone estimating function.

use serde::{Deserialize, Serialize};

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::rankest::{evaluate, Method};

/// An estimating function `Psi(beta)` whose zero crossing is sought. `eval`
/// returns the unnormalised sum; the solver works with `Psi / n`.
pub trait EstimatingFunction: Sync {
    fn dim(&self) -> usize;
    fn n(&self) -> usize;
    fn eval(&self, beta: &[f64]) -> Result<Vec<f64>>;

    /// Scale of `n^{-1/2} Psi` used by the acceptance rule.
    fn acceptance_scale(&self, _beta: &[f64]) -> Result<f64> {
        Ok(1.0)
    }

    /// Default initial bracket half-width for coordinate `k`.
    fn natural_step(&self, _k: usize) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    Zero,
    Gehan,
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Accept when `||Psi/n - target||_inf <= tol * scale / sqrt(n)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Initial half-width per coordinate; `None` uses the function's natural step.
    pub bracket_init: Option<f64>,
    pub bracket_grow: f64,
    /// Number of bracket expansions before giving up on a coordinate.
    pub max_expansions: usize,
    /// Bisection stops once the bracket is narrower than this.
    pub crossing_width: f64,
    pub init: InitRule,
    /// Overrides the acceptance scale otherwise computed at the start point.
    pub scale: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-2,
            max_sweeps: 50,
            bracket_init: None,
            bracket_grow: 2.0,
            max_expansions: 40,
            crossing_width: 1e-8,
            init: InitRule::Zero,
            scale: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("solver.tol must be positive".into()));
        }
        if self.max_sweeps < 1 {
            return Err(Error::InvalidConfig("solver.max_sweeps must be at least 1".into()));
        }
        if !(self.bracket_grow > 1.0) {
            return Err(Error::InvalidConfig("solver.bracket_grow must exceed 1".into()));
        }
        if let Some(b) = self.bracket_init {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig("solver.bracket_init must be positive".into()));
            }
        }
        if !(self.crossing_width > 0.0) {
            return Err(Error::InvalidConfig("solver.crossing_width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub beta_hat: Vec<f64>,
    /// `Psi(beta_hat) / n - target`.
    pub psi_at_solution: Vec<f64>,
    pub sweeps_used: usize,
    pub converged: bool,
    /// Width of the last certified crossing interval per coordinate (0 for an exact zero).
    pub crossing_widths: Vec<f64>,
    pub threshold: f64,
    /// `start`, `psi_norm`, `fixed_point` or `cycle`; empty when not converged.
    pub criterion: String,
    pub evaluations: usize,
}

struct Counter<'a, F: EstimatingFunction + ?Sized> {
    f: &'a F,
    target: &'a [f64],
    inv_n: f64,
    calls: usize,
}

impl<F: EstimatingFunction + ?Sized> Counter<'_, F> {
    fn eval(&mut self, beta: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        let mut v = self.f.eval(beta)?;
        for (x, t) in v.iter_mut().zip(self.target) {
            *x = *x * self.inv_n - t;
        }
        Ok(v)
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finds a zero crossing of `Psi / n`.
pub fn solve<F: EstimatingFunction + ?Sized>(f: &F, beta0: &[f64], config: &SolverConfig) -> Result<SolveOutcome> {
    let target = vec![0.0; f.dim()];
    solve_offset(f, beta0, config, &target)
}

/// Finds a zero crossing of `Psi / n - target`.
pub fn solve_offset<F: EstimatingFunction + ?Sized>(
    f: &F,
    beta0: &[f64],
    config: &SolverConfig,
    target: &[f64],
) -> Result<SolveOutcome> {
    config.validate()?;
    let p = f.dim();
    if beta0.len() != p || target.len() != p {
        return Err(Error::InvalidConfig(format!("start point and target must have length {p}")));
    }
    let n = f.n() as f64;
    let mut g = Counter { f, target, inv_n: 1.0 / n, calls: 0 };
    let mut beta = beta0.to_vec();
    let scale = match config.scale {
        Some(s) => s,
        None => f.acceptance_scale(&beta)?,
    };
    let threshold = config.tol * scale / n.sqrt();
    let mut val = g.eval(&beta)?;
    let mut widths = vec![f64::NAN; p];
    let mut half: Vec<f64> = (0..p).map(|k| config.bracket_init.unwrap_or_else(|| f.natural_step(k))).collect();
    let initial_half = half.clone();

    let outcome = |beta: Vec<f64>, val: Vec<f64>, sweeps, converged, widths, criterion: &str, calls| SolveOutcome {
        beta_hat: beta,
        psi_at_solution: val,
        sweeps_used: sweeps,
        converged,
        crossing_widths: widths,
        threshold,
        criterion: criterion.into(),
        evaluations: calls,
    };

    if sup_norm(&val) <= threshold {
        return Ok(outcome(beta, val, 0, true, vec![0.0; p], "start", g.calls));
    }

    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for sweep in 1..=config.max_sweeps {
        let mut max_move = 0.0f64;
        for k in 0..p {
            let t0 = beta[k];
            let g0 = val[k];
            if g0 == 0.0 {
                widths[k] = 0.0;
                continue;
            }
            let s0 = sign(g0);
            let mut eval_k = |t: f64, beta: &mut Vec<f64>| -> Result<(f64, Vec<f64>)> {
                beta[k] = t;
                let v = g.eval(beta)?;
                Ok((v[k], v))
            };

            // expand symmetrically until a sign change appears on either side
            let mut h = half[k];
            let (mut inner_r, mut inner_l) = (t0, t0);
            let mut bracket = None;
            let mut signs = vec![s0];
            for _ in 0..=config.max_expansions {
                let (gr, vr) = eval_k(t0 + h, &mut beta)?;
                let (gl, vl) = eval_k(t0 - h, &mut beta)?;
                signs.push(sign(gr));
                signs.push(sign(gl));
                if sign(gr) != s0 {
                    bracket = Some((inner_r, t0 + h, gr, vr));
                    break;
                }
                if sign(gl) != s0 {
                    bracket = Some((inner_l, t0 - h, gl, vl));
                    break;
                }
                inner_r = t0 + h;
                inner_l = t0 - h;
                h *= config.bracket_grow;
            }
            let Some((inner, edge, g_edge, v_edge)) = bracket else {
                beta[k] = t0;
                return Err(Error::NoBracket { coord: k, signs });
            };
            // `a` keeps the sign of g0, `b` the opposite sign
            let mut exact = (g_edge == 0.0).then_some((edge, v_edge));
            let (mut a, mut b) = (inner, edge);
            while exact.is_none() && (a - b).abs() >= config.crossing_width {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                let (gm, vm) = eval_k(mid, &mut beta)?;
                if gm == 0.0 {
                    exact = Some((mid, vm));
                } else if sign(gm) == s0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let new = match exact {
                Some((t, v)) => {
                    widths[k] = 0.0;
                    beta[k] = t;
                    val = v;
                    t
                }
                None => {
                    widths[k] = (a - b).abs();
                    let t = 0.5 * (a + b);
                    beta[k] = t;
                    val = g.eval(&beta)?;
                    t
                }
            };
            let step = (new - t0).abs();
            max_move = max_move.max(step);
            half[k] = (2.0 * step).max(16.0 * config.crossing_width).min(initial_half[k]);
        }
        if sup_norm(&val) <= threshold {
            return Ok(outcome(beta, val, sweep, true, widths, "psi_norm", g.calls));
        }
        if max_move <= config.crossing_width {
            return Ok(outcome(beta, val, sweep, true, widths, "fixed_point", g.calls));
        }
        // coordinate sweeps can cycle between cells of the step function (or
        // drift inside one); a repeated residual vector marks the cycle and
        // its member with the smallest residual is returned
        if let Some(start) = history.iter().position(|(_, v)| *v == val) {
            let (b, v) = history[start..]
                .iter()
                .min_by(|x, y| sup_norm(&x.1).total_cmp(&sup_norm(&y.1)))
                .cloned()
                .expect("cycle has members");
            return Ok(outcome(b, v, sweep, true, widths, "cycle", g.calls));
        }
        history.push((beta.clone(), val.clone()));
    }
    let out = outcome(beta, val, config.max_sweeps, false, widths, "", g.calls);
    Err(Error::NotConverged(Box::new(out)))
}

/// The rank (or Gehan) estimating function of a sample as a solver target.
pub struct RankEquation<'a> {
    pub sample: &'a CensoredSample,
    pub method: Method,
    steps: Vec<f64>,
}

impl<'a> RankEquation<'a> {
    pub fn new(sample: &'a CensoredSample, method: Method) -> Self {
        let y_scale = robust_scale(sample.y());
        let steps = (0..sample.p())
            .map(|k| {
                let col: Vec<f64> = sample.column(k).collect();
                let sd = std_dev(&col);
                if sd > 0.0 {
                    0.5 * y_scale / sd
                } else {
                    0.5 * y_scale
                }
            })
            .collect();
        Self { sample, method, steps }
    }
}

impl EstimatingFunction for RankEquation<'_> {
    fn dim(&self) -> usize {
        self.sample.p()
    }

    fn n(&self) -> usize {
        self.sample.n()
    }

    fn eval(&self, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(evaluate(self.sample, &self.method, beta, false)?.0)
    }

    fn acceptance_scale(&self, beta: &[f64]) -> Result<f64> {
        let (_, sigma) = evaluate(self.sample, &self.method, beta, true)?;
        let sigma = sigma.unwrap();
        let d = (0..sigma.nrows()).fold(0.0f64, |m, k| m.max(sigma[(k, k)]));
        Ok(if d > 0.0 { d.sqrt() } else { 1.0 })
    }

    fn natural_step(&self, k: usize) -> f64 {
        self.steps[k]
    }
}

/// Resolves the start point and solves `Psi(beta) = 0` for a sample.
pub fn fit_beta(sample: &CensoredSample, method: &Method, config: &SolverConfig) -> Result<SolveOutcome> {
    let p = sample.p();
    let start = match &config.init {
        InitRule::Zero => vec![0.0; p],
        InitRule::Vector(v) => {
            if v.len() != p {
                return Err(Error::InvalidConfig(format!("solver.init vector must have length {p}")));
            }
            v.clone()
        }
        InitRule::Gehan => {
            let cfg = SolverConfig { init: InitRule::Zero, ..config.clone() };
            fit_beta(sample, &Method::Gehan, &cfg)?.beta_hat
        }
    };
    let eq = RankEquation::new(sample, method.clone());
    solve(&eq, &start, config)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

fn robust_scale(v: &[f64]) -> f64 {
    let median = |s: &mut Vec<f64>| {
        s.sort_by(f64::total_cmp);
        let m = s.len();
        if m % 2 == 1 {
            s[m / 2]
        } else {
            0.5 * (s[m / 2 - 1] + s[m / 2])
        }
    };
    let mut s = v.to_vec();
    let med = median(&mut s);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let mad = 1.4826 * median(&mut dev);
    if mad > 0.0 {
        mad
    } else {
        let sd = std_dev(v);
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    }
}
