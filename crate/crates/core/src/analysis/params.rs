use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Position of λ relative to the critical value 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Constants derived from the fragmentation strength λ of `R(g) = λ/g²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub lambda: f64,
    /// Positive root of `α(α − 1) = λ`.
    pub alpha: f64,
    /// Excursion tail exponent `(α − 1)/2`.
    pub beta: f64,
    /// Shape of the height law, `(6 − λ)/4`.
    pub c: f64,
    /// Dimension `2α + 1` of the Bessel process seen inside an excursion.
    pub bessel_dim: f64,
    pub regime: Regime,
}

impl LambdaParams {
    /// Shape of the conditional endpoint law `X_t²/(2(t − σ_t))`.
    pub fn endpoint_shape(&self) -> f64 {
        self.alpha / 2.0 + 1.0
    }
}

pub fn lambda_params(lambda: f64) -> Result<LambdaParams> {
    ensure(lambda >= 0.0 && lambda.is_finite(), || {
        format!("lambda must be a finite nonnegative number, got {lambda}")
    })?;
    let alpha = 0.5 * (1.0 + (4.0 * lambda + 1.0).sqrt());
    let regime = if lambda < 6.0 {
        Regime::Subcritical
    } else if lambda == 6.0 {
        Regime::Critical
    } else {
        Regime::Supercritical
    };
    Ok(LambdaParams {
        lambda,
        alpha,
        beta: 0.5 * (alpha - 1.0),
        c: (6.0 - lambda) / 4.0,
        bessel_dim: 2.0 * alpha + 1.0,
        regime,
    })
}

/// Root of the Lamperti exponent `φ(θ) = θ²/2 + θ/2 − λ/2` and whether it
/// lies strictly inside (0, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LampertiRoot {
    pub theta0: f64,
    pub has_recurrent_extension: bool,
}

pub fn lamperti_root(lambda: f64) -> LampertiRoot {
    let theta0 = 0.5 * ((1.0 + 4.0 * lambda).sqrt() - 1.0);
    LampertiRoot {
        theta0,
        has_recurrent_extension: theta0 > 0.0 && theta0 < 2.0,
    }
}

/// The Lamperti exponent itself.
pub fn lamperti_exponent(lambda: f64, theta: f64) -> f64 {
    0.5 * theta * theta + 0.5 * theta - 0.5 * lambda
}
