use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::EmpiricalSample;
use crate::error::{ensure, Result};

/// Collapse of the rescaled excursion random walk onto a β-stable subordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorReport {
    pub beta: f64,
    pub levels: Vec<u64>,
    pub r_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// `kappa[level][r_index * theta_grid.len() + theta_index]`.
    pub kappa: Vec<Vec<f64>>,
    /// Mean of all κ values; estimates the Laplace-exponent constant.
    pub constant: f64,
    /// `(max κ − min κ) / mean κ` over levels and grid.
    pub dispersion: f64,
}

/// For each truncation level `n`, estimates the Laplace transform of
/// `S_{⌊n^β r⌋}` from i.i.d. excursion lengths and forms
/// `κ_n(r, θ) = −log L̂_n(r, θ) / (r θ^β)`, which is constant in `(n, r, θ)`
/// exactly when the walk has collapsed onto a subordinator with exponent
/// `C θ^β`.
pub fn subordinator_scaling_check(
    excursion_lengths_by_n: &BTreeMap<u64, EmpiricalSample>,
    beta: f64,
    r_grid: &[f64],
    theta_grid: &[f64],
) -> Result<SubordinatorReport> {
    ensure(excursion_lengths_by_n.len() >= 2, || {
        "subordinator scaling check needs at least two truncation levels".into()
    })?;
    ensure(beta > 0.0, || format!("stable index must be positive, got {beta}"))?;
    ensure(!r_grid.is_empty() && !theta_grid.is_empty(), || "empty (r, θ) grid".into())?;
    ensure(r_grid.iter().chain(theta_grid).all(|&v| v > 0.0), || {
        "(r, θ) grid values must be positive".into()
    })?;
    let sizes: Vec<usize> = excursion_lengths_by_n.values().map(|s| s.len()).collect();
    ensure(sizes.iter().all(|&s| s == sizes[0]), || {
        format!("mismatched sample sizes across levels: {sizes:?}")
    })?;

    let mut kappa = Vec::with_capacity(excursion_lengths_by_n.len());
    for (&n, sample) in excursion_lengths_by_n {
        let m = sample.len() as f64;
        let steps_per_r = (n as f64).powf(beta);
        let mut row = Vec::with_capacity(r_grid.len() * theta_grid.len());
        for &r in r_grid {
            let k = (steps_per_r * r).floor();
            for &theta in theta_grid {
                let lt = sample.values().iter().map(|e| (-theta * e).exp()).sum::<f64>() / m;
                row.push(-k * lt.ln() / (r * theta.powf(beta)));
            }
        }
        kappa.push(row);
    }
    let all: Vec<f64> = kappa.iter().flatten().copied().collect();
    let constant = all.iter().sum::<f64>() / all.len() as f64;
    let (lo, hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(SubordinatorReport {
        beta,
        levels: excursion_lengths_by_n.keys().copied().collect(),
        r_grid: r_grid.to_vec(),
        theta_grid: theta_grid.to_vec(),
        kappa,
        constant,
        dispersion: (hi - lo) / constant.abs(),
    })
}
