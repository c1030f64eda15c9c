use std::collections::BTreeMap;
use std::f64::consts::PI;

use brownian_marble::analysis::{lambda_params, subordinator_scaling_check, tail_exponent_fit, EmpiricalSample};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Positive β-stable variable with `E[e^{−θS}] = e^{−θ^β}` (Kanter).
fn stable(beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u = PI * rng.random::<f64>();
    let e = -(1.0 - rng.random::<f64>()).ln();
    let a = ((beta * u).sin().powf(beta) * ((1.0 - beta) * u).sin().powf(1.0 - beta) / u.sin()).powf(1.0 / (1.0 - beta));
    (a / e).powf((1.0 - beta) / beta)
}

fn levels(beta: f64, m: usize) -> BTreeMap<u64, EmpiricalSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    [1024u64, 4096, 16384]
        .into_iter()
        .map(|n| {
            let v = (0..m).map(|_| stable(beta, &mut rng) / n as f64).collect();
            (n, EmpiricalSample::from_values(v).unwrap())
        })
        .collect()
}

#[test]
fn kanter_sampler_has_the_stable_laplace_transform() {
    let beta = 0.6514;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s: Vec<f64> = (0..200_000).map(|_| stable(beta, &mut rng)).collect();
    for theta in [0.5, 1.0, 2.0] {
        let lt = s.iter().map(|x| (-theta * x).exp()).sum::<f64>() / s.len() as f64;
        assert!((lt - (-f64::powf(theta, beta)).exp()).abs() < 0.005, "theta {theta}: {lt}");
    }
}

#[test]
fn stable_sums_collapse_onto_a_subordinator() {
    let beta = lambda_params(3.0).unwrap().beta;
    let data = levels(beta, 200_000);
    let (r, theta) = ([1.0, 2.0], [64.0, 128.0, 256.0]);
    let ok = subordinator_scaling_check(&data, beta, &r, &theta).unwrap();
    assert!(ok.dispersion < 0.05, "dispersion {}", ok.dispersion);
    assert!((ok.constant - 1.0).abs() < 0.03, "constant {}", ok.constant);

    let wrong = subordinator_scaling_check(&data, beta + 0.3, &r, &theta).unwrap();
    assert!(wrong.dispersion > 3.0 * ok.dispersion);
    let per_level: Vec<f64> = wrong.kappa.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
    assert!(per_level.windows(2).all(|w| w[1] > w[0]), "{per_level:?}");
}

#[test]
fn power_law_fits() {
    let times: Vec<f64> = (0..=20).map(|k| 10.0 * 100f64.powf(k as f64 / 20.0)).collect();
    let curve: Vec<(f64, f64)> = times.iter().map(|&t| (t, 3.0 / t)).collect();
    let f = tail_exponent_fit(&curve, (10.0, 1000.0)).unwrap();
    assert!((f.beta_hat - 1.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
}
