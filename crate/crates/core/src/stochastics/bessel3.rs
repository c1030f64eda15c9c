//! Closed-form transition law of the three-dimensional Bessel process.
//!
//! From `x` over time `s²` the position is the norm of `x·e₁ + s·Z`,
//! `Z ~ N(0, I₃)`, with CDF
//! `F(y) = Φ(a) − Φ(−b) − (s/x)(φ(a) − φ(b))`, `a = (y − x)/s`, `b = (y + x)/s`.

use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
fn phi(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

#[inline]
fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `(s/x)(φ(a) − φ(b))`, written so that it stays accurate as `x → 0`.
#[inline]
fn kernel(x: f64, s: f64, y: f64) -> f64 {
    if x == 0.0 {
        let u = y / s;
        return 2.0 * u * phi(u);
    }
    let k = 2.0 * x * y / (s * s);
    s / x * phi((y - x) / s) * -(-k).exp_m1()
}

/// `P(X_{t+s²} ≤ y | X_t = x)`.
pub fn bessel3_cdf(x: f64, sqrt_dt: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let s = sqrt_dt;
    (norm_cdf((y - x) / s) - norm_sf((y + x) / s) - kernel(x, s, y)).clamp(0.0, 1.0)
}

/// `P(X_{t+s²} > y | X_t = x)`, accurate in the upper tail.
pub fn bessel3_sf(x: f64, sqrt_dt: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let s = sqrt_dt;
    (norm_sf((y - x) / s) + norm_sf((y + x) / s) + kernel(x, s, y)).clamp(0.0, 1.0)
}

pub fn bessel3_density(x: f64, sqrt_dt: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    y / (sqrt_dt * sqrt_dt) * kernel(x, sqrt_dt, y)
}

/// Transition quantile at level `Φ(z)`.
///
/// Nondecreasing in both `x` and `z`, so feeding several starting points the
/// same `z` moves them by exact Bessel-3 transitions without ever reordering
/// them.
pub fn bessel3_quantile(x: f64, sqrt_dt: f64, z: f64) -> f64 {
    let s = sqrt_dt;
    let upper = z > 0.0;
    let p = if upper { norm_sf(z) } else { norm_cdf(z) };
    // increasing in y, root at the quantile
    let resid = |y: f64| {
        if upper {
            p - bessel3_sf(x, s, y)
        } else {
            bessel3_cdf(x, s, y) - p
        }
    };

    // Abdel-Aty's cube-root normal approximation to the noncentral χ²₃.
    let nc = (x / s) * (x / s);
    let k = 3.0 + nc;
    let v = 2.0 * (3.0 + 2.0 * nc) / (9.0 * k * k);
    let cube = (1.0 - v + v.sqrt() * z).max(1e-3);
    let mut y = s * (k * cube * cube * cube).sqrt();

    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let scale = x + s;
    for _ in 0..200 {
        let r = resid(y);
        if r == 0.0 {
            return y;
        }
        if r < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let d = bessel3_density(x, s, y);
        let newton = if d > 0.0 { y - r / d } else { f64::NAN };
        if newton > lo && newton < hi {
            // quadratic convergence: the error after this step is far below tol
            if (newton - y).abs() <= 1e-6 * s {
                return newton;
            }
            y = newton;
        } else {
            let next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * y };
            if (next - y).abs() <= 1e-12 * scale {
                return next;
            }
            y = next;
        }
    }
    y
}
