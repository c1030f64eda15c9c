use brownian_marble::analysis::{
    ks_critical_two_sample, ks_distance, ks_two_sample, lambda_params, mean_stderr, EmpiricalSample,
};
use brownian_marble::exec::Executor;
use brownian_marble::rbessel::{
    ladder_sweep, replicate_endpoints, simulate_rbessel, survival_probability, truncation_ladder_endpoints,
    RateFunction,
};
use brownian_marble::stochastics::{gamma_cdf, tags, RngStream, TimeGrid};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

fn sample(v: Vec<f64>) -> EmpiricalSample {
    EmpiricalSample::from_values(v).unwrap()
}

#[test]
fn no_fragmentation_is_bessel3() {
    let s = replicate_endpoints(&RateFunction::constant(0.0), 0.0, 1.0, None, 100_000, 1, Executor::default()).unwrap();
    let sq: Vec<f64> = s.iter().map(|e| e.x_t * e.x_t).collect();
    let (m, _) = mean_stderr(&sq);
    assert!((m - 3.0).abs() < 0.06, "E[X_1^2] = {m}");
    // X²/2t ~ Gamma(3/2)
    let ks = ks_distance(&sample(sq.iter().map(|v| v / 2.0).collect()), |v| gamma_cdf(1.5, 1.0, v));
    assert!(ks < 0.01, "KS {ks}");
    assert!(s.iter().all(|e| e.n_jumps == 0 && e.sigma_t == Some(0.0)));
}

#[test]
fn constant_rate_jumps_are_poisson() {
    let (r0, t, n) = (2.0, 1.5, 20_000);
    let s = replicate_endpoints(&RateFunction::constant(r0), 0.0, t, None, n, 2, Executor::default()).unwrap();
    let counts: Vec<f64> = s.iter().map(|e| e.n_jumps as f64).collect();
    let (m, se) = mean_stderr(&counts);
    assert!((m - r0 * t).abs() < 3.0 * se, "mean count {m} ± {se}");

    let p = survival_probability(&RateFunction::constant(r0), t, n, 3).unwrap();
    let exact = (-r0 * t).exp();
    assert!((p.p_hat - exact).abs() < 3.0 * p.stderr, "{} vs {exact}", p.p_hat);
}

#[test]
fn truncated_paths_jump_and_stay_positive() {
    // about 2.6% of runs from 0 escape without a jump on [0, 1] at n = 64
    let rate = RateFunction::truncated(3.0, 64.0);
    let s = replicate_endpoints(&rate, 0.0, 1.0, None, 2000, 4, Executor::default()).unwrap();
    let jumped = s.iter().filter(|e| e.n_jumps > 0).count();
    assert!(jumped as f64 > 0.95 * 2000.0, "{jumped}/2000 jumped");
    let grid = TimeGrid::new(0.0, 1.0, 500).unwrap();
    for i in 0..20 {
        let mut rng = RngStream::derive(4, tags::RBESSEL, i);
        let p = simulate_rbessel(&rate, 0.0, grid, &mut rng).unwrap();
        assert!(p.x[1..].iter().all(|&x| x > 0.0));
    }
}

#[test]
fn single_level_ladder_matches_direct_simulation() {
    let n = 10_000;
    let rate = RateFunction::truncated(3.0, 256.0);
    let direct = replicate_endpoints(&rate, 0.0, 1.0, None, n, 5, Executor::default()).unwrap();
    let ladder: Vec<f64> = Executor::default()
        .try_map(n, |i| {
            let mut rng = RngStream::derive(6, tags::LADDER, i as u64);
            truncation_ladder_endpoints(3.0, 0.0, 1.0, &[256.0], &mut rng).map(|v| v[0])
        })
        .unwrap();
    let ks = ks_two_sample(&sample(direct.iter().map(|e| e.x_t).collect()), &sample(ladder));
    assert!(ks < ks_critical_two_sample(n, n), "KS {ks}");
}

#[test]
fn critical_ladder_declines() {
    let s = ladder_sweep(6.0, &[64.0, 256.0, 1024.0], 1.0, 4000, 0.9, 7, Executor::default()).unwrap();
    assert!(s.quantiles_decreasing(), "{:?}", s.levels.iter().map(|l| l.max_excursion_quantile).collect::<Vec<_>>());
    assert!(s.medians_decreasing());
}

#[test]
fn height_law_is_beta_times_gamma() {
    // X_t²/2t = ((t − σ)/t)·(X_t²/2(t − σ)) with independent Beta(1 − β, β) and Gamma(α/2 + 1) factors
    let p = lambda_params(3.0).unwrap();
    let s = replicate_endpoints(&RateFunction::truncated(3.0, 4096.0), 0.0, 1.0, None, 10_000, 8, Executor::default())
        .unwrap();
    let ours = sample(s.iter().map(|e| e.x_t * e.x_t / 2.0).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = Beta::new(1.0 - p.beta, p.beta).unwrap();
    let y = Gamma::new(p.endpoint_shape(), 1.0).unwrap();
    let oracle = sample((0..200_000).map(|_| w.sample(&mut rng) * y.sample(&mut rng)).collect());
    let ks = ks_two_sample(&ours, &oracle);
    assert!(ks < 0.03, "KS {ks}");
    // and it is far from the single Gamma(c) law
    assert!(ks_distance(&ours, |v| gamma_cdf(p.c, 1.0, v)) > 0.1);
}
