use serde::{Deserialize, Serialize};

use super::EndpointSample;
use crate::analysis::{ks_distance, lambda_params, EmpiricalSample};
use crate::error::{ensure, Result};
use crate::report::LawCheck;
use crate::stochastics::{beta_cdf, gamma_cdf};

/// Endpoint laws of the process started at 0 and observed at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointLaws {
    /// `σ_t/t` against Beta(β, 1 − β).
    pub birth: LawCheck,
    /// `X_t²/t` (the squared bubble height over `2t`) against Gamma(c).
    pub height: LawCheck,
    /// `X_t²/(2(t − σ_t))` against Gamma(α/2 + 1).
    pub endpoint: LawCheck,
}

pub fn endpoint_laws(samples: &[EndpointSample], lambda: f64, t: f64, threshold: f64) -> Result<EndpointLaws> {
    let p = lambda_params(lambda)?;
    ensure(lambda > 0.0 && lambda < 6.0, || {
        format!("endpoint laws need 0 < lambda < 6, got {lambda}")
    })?;
    ensure(t > 0.0, || format!("observation time must be positive, got {t}"))?;
    let sigmas: Vec<f64> = samples.iter().filter_map(|s| s.sigma_t).map(|s| s / t).collect();
    let heights: Vec<f64> = samples.iter().map(|s| s.x_t * s.x_t / t).collect();
    let conditioned: Vec<f64> = samples
        .iter()
        .filter_map(|s| s.sigma_t.filter(|&z| z < t).map(|z| s.x_t * s.x_t / (2.0 * (t - z))))
        .collect();
    let (a, b, c, shape) = (p.beta, 1.0 - p.beta, p.c, p.endpoint_shape());
    let check = |values: Vec<f64>, cdf: &dyn Fn(f64) -> f64| -> Result<LawCheck> {
        let s = EmpiricalSample::from_values(values)?;
        Ok(LawCheck::below(ks_distance(&s, cdf), threshold).with("n", s.len()))
    };
    Ok(EndpointLaws {
        birth: check(sigmas, &|v| beta_cdf(a, b, v))?.with("a", a).with("b", b),
        height: check(heights, &|v| gamma_cdf(c, 1.0, v))?.with("shape", c),
        endpoint: check(conditioned, &|v| gamma_cdf(shape, 1.0, v))?.with("shape", shape),
    })
}
