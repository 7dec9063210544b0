#![allow(dead_code)]

use rand::Rng;
use rankaft::data::CensoredSample;
use rankaft::scores::{ScoreFunction, TruncationMode};
use rankaft::stepcdf::StepCdf;

/// Every built-in score family, resolved at sample size `n`.
pub fn builtin_scores(n: usize) -> Vec<ScoreFunction> {
    vec![
        ScoreFunction::wilcoxon(),
        ScoreFunction::logrank(),
        ScoreFunction::shifted_logrank(n),
        ScoreFunction::normal(),
        ScoreFunction::winsorized_normal(0.05).unwrap(),
        ScoreFunction::generalized_f(1.0, 10.0).unwrap(),
        ScoreFunction::generalized_f(10.0, 1.0).unwrap(),
        ScoreFunction::generalized_f(3.0, 3.0).unwrap(),
        ScoreFunction::generalized_f(0.5, 2.5).unwrap(),
        ScoreFunction::truncated(ScoreFunction::normal(), n, TruncationMode::Normal),
        ScoreFunction::truncated(ScoreFunction::logrank(), n, TruncationMode::Extreme),
    ]
}

/// Random censored sample. With `ties` the responses and covariates sit on
/// coarse grids so residual ties are frequent.
pub fn random_sample<R: Rng>(rng: &mut R, n: usize, p: usize, ties: bool, censor: f64) -> CensoredSample {
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        if ties {
            y.push(rng.random_range(0..6) as f64 * 0.5);
            rows.push((0..p).map(|_| rng.random_range(0..3) as f64).collect());
        } else {
            y.push(rng.random::<f64>() * 4.0 - 2.0);
            rows.push((0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
        }
        delta.push(rng.random::<f64>() >= censor);
    }
    CensoredSample::new(y, delta, rows).unwrap()
}

/// Proper step CDF with `m` jumps at random sorted points.
pub fn random_stepcdf<R: Rng>(rng: &mut R, m: usize) -> StepCdf {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for v in &mut w {
        acc += *v / total;
        *v = acc.min(1.0);
    }
    w[m - 1] = 1.0;
    let mut t = 0.0;
    let points = (0..m)
        .map(|_| {
            t += rng.random::<f64>() + 0.01;
            t
        })
        .collect();
    StepCdf::from_parts(points, w).unwrap()
}

pub fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
