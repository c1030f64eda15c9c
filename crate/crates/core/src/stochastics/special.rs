//! Regularized incomplete gamma and beta functions.
//!
//! Series below the pivot, modified-Lentz continued fractions above. The
//! pivots are `x = shape + 1` for the gamma function and
//! `x = (a + 1) / (a + b + 2)` for the beta function; both keep the
//! absolute error near 1e-15 over the ranges the KS targets use.

use crate::error::{ensure, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Regularized lower incomplete gamma `P(shape, x)`.
pub fn reg_inc_gamma(shape: f64, x: f64) -> Result<f64> {
    check_gamma_args(shape, x)?;
    Ok(if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < shape + 1.0 {
        gamma_series(shape, x)
    } else {
        1.0 - gamma_cont_frac(shape, x)
    })
}

/// Regularized upper incomplete gamma `Q(shape, x) = 1 - P(shape, x)`,
/// computed directly in the tail to avoid cancellation.
pub fn reg_inc_gamma_upper(shape: f64, x: f64) -> Result<f64> {
    check_gamma_args(shape, x)?;
    Ok(if x == 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < shape + 1.0 {
        1.0 - gamma_series(shape, x)
    } else {
        gamma_cont_frac(shape, x)
    })
}

fn check_gamma_args(shape: f64, x: f64) -> Result<()> {
    ensure(shape > 0.0 && shape.is_finite(), || {
        format!("gamma shape must be positive, got {shape}")
    })?;
    ensure(x >= 0.0, || format!("incomplete gamma argument must be nonnegative, got {x}"))
}

fn gamma_prefactor(shape: f64, x: f64) -> f64 {
    (-x + shape * x.ln() - ln_gamma(shape)).exp()
}

fn gamma_series(shape: f64, x: f64) -> f64 {
    let mut ap = shape;
    let mut del = 1.0 / shape;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum * gamma_prefactor(shape, x)).min(1.0)
}

fn gamma_cont_frac(shape: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - shape;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - shape);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (gamma_prefactor(shape, x) * h).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    ensure(a > 0.0 && b > 0.0, || {
        format!("beta parameters must be positive, got a={a}, b={b}")
    })?;
    ensure((0.0..=1.0).contains(&x), || {
        format!("incomplete beta argument must lie in [0, 1], got {x}")
    })?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// CDF of Gamma(shape, scale) at `x`; zero for `x ≤ 0`.
pub fn gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        reg_inc_gamma(shape, x / scale).expect("validated gamma parameters")
    }
}

/// CDF of Beta(a, b) at `x`, clamped outside [0, 1].
pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    reg_inc_beta(a, b, x.clamp(0.0, 1.0)).expect("validated beta parameters")
}

/// Error function via `erf(x) = sign(x)·P(1/2, x²)`.
pub fn erf(x: f64) -> f64 {
    let p = reg_inc_gamma(0.5, x * x).expect("valid argument");
    if x < 0.0 {
        -p
    } else {
        p
    }
}
