//! Special-function helpers: normal quantiles, chi-square tails and a polished
//! inverse of the regularized incomplete beta function. Incomplete gamma and
//! beta functions come from `statrs`, `erfc` from `libm`.

use statrs::function::{beta, erf, gamma};

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile; returns `-inf`/`+inf` at 0 and 1.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // Newton polish on the lower tail to reach near machine precision
    for _ in 0..2 {
        let (target, q) = if z <= 0.0 { (p, norm_cdf(z)) } else { (1.0 - p, norm_cdf(-z)) };
        let dens = norm_pdf(z);
        if dens <= 0.0 {
            break;
        }
        let step = (q - target) / dens;
        z -= if z <= 0.0 { step } else { -step };
    }
    z
}

/// Upper tail probability of a chi-square variable with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(df as f64 / 2.0, x / 2.0)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    beta::ln_beta(a, b)
}

/// Quantile of Beta(a, b), returned as `(x, 1 - x)` with both parts accurate
/// to near machine precision (the complement is solved directly above the median).
pub fn beta_quantile(u: f64, a: f64, b: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 1.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    if u > 0.5 {
        let (c, x) = lower_beta_quantile(1.0 - u, b, a);
        (x, c)
    } else {
        lower_beta_quantile(u, a, b)
    }
}

/// Central F quantile with `d1`, `d2` degrees of freedom.
pub fn f_quantile(u: f64, d1: f64, d2: f64) -> f64 {
    let (x, c) = beta_quantile(u, d1 / 2.0, d2 / 2.0);
    if c == 0.0 {
        return f64::INFINITY;
    }
    (d2 / d1) * x / c
}

pub fn f_cdf(q: f64, d1: f64, d2: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let x = d1 * q / (d1 * q + d2);
    beta::beta_reg(d1 / 2.0, d2 / 2.0, x)
}

// Solves I_x(a, b) = u for u <= 1/2 by safeguarded Newton iteration started
// from the statrs estimate.
fn lower_beta_quantile(u: f64, a: f64, b: f64) -> (f64, f64) {
    if a == 1.0 {
        // I_x(1, b) = 1 - (1 - x)^b
        let t = (-u).ln_1p() / b;
        return (-t.exp_m1(), t.exp());
    }
    if b == 1.0 {
        // I_x(a, 1) = x^a
        let t = u.ln() / a;
        return (t.exp(), -t.exp_m1());
    }
    let lnb = beta::ln_beta(a, b);
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x = beta::inv_beta_reg(a, b, u);
    if !(x > 0.0 && x < 1.0) {
        // power-law tail approximation near zero
        x = ((u.ln() + a.ln() + lnb) / a).exp().clamp(f64::MIN_POSITIVE, 0.5);
    }
    for _ in 0..60 {
        let f = beta::beta_reg(a, b, x) - u;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_dens = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lnb;
        let step = f / ln_dens.exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi > 0.0 && lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        }
        let moved = (next - x).abs();
        x = next;
        if moved <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    (x, 1.0 - x)
}
