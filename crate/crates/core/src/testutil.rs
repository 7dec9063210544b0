use rand::Rng;

use crate::data::CensoredSample;
use crate::stepcdf::StepCdf;

/// Adaptive Simpson quadrature, independent of the library's Gauss-Kronrod rule.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(&f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn random_stepcdf<R: Rng>(rng: &mut R, m: usize) -> StepCdf {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for v in &mut w {
        acc += *v / total;
        *v = acc.min(1.0);
    }
    w[m - 1] = 1.0;
    StepCdf::from_parts((0..m).map(|k| k as f64).collect(), w).unwrap()
}

/// Random censored sample; with `ties` the responses and covariates live on
/// coarse grids so exact residual ties are common.
pub fn random_sample<R: Rng>(rng: &mut R, n: usize, p: usize, ties: bool) -> CensoredSample {
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        if ties {
            y.push((rng.random_range(0..8) as f64) * 0.5);
            rows.push((0..p).map(|_| rng.random_range(0..3) as f64).collect());
        } else {
            y.push(rng.random::<f64>() * 4.0 - 2.0);
            rows.push((0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
        }
        delta.push(rng.random::<f64>() < 0.7);
    }
    CensoredSample::new(y, delta, rows).unwrap()
}
