use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};

/// Provenance attached to a sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub lambda: Option<f64>,
    pub truncation: Option<f64>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

/// i.i.d. scalar draws plus where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub meta: SampleMeta,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, meta: SampleMeta) -> Result<Self> {
        ensure(!values.is_empty(), || "empirical sample must be nonempty".into())?;
        ensure(values.iter().all(|v| !v.is_nan()), || "empirical sample contains NaN".into())?;
        Ok(Self { values, meta })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SampleMeta::default())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted(), q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect(), self.meta.clone())
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Linear-interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure(x.len() == y.len() && x.len() >= 2, || {
        "correlation needs two equal-length samples of size >= 2".into()
    })?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    ensure(sxx > 0.0 && syy > 0.0, || "correlation of a constant sample".into())?;
    Ok(sxy / (sxx * syy).sqrt())
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n − F|`, evaluated on
/// both sides of every jump of the empirical CDF.
pub fn ks_distance(sample: &EmpiricalSample, cdf: impl Fn(f64) -> f64) -> f64 {
    let sorted = sample.sorted();
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let xa = a.sorted();
    let xb = b.sorted();
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic one-sample KS critical value at level ≈ 0.01.
pub fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Asymptotic two-sample KS critical value at level ≈ 0.01.
pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    1.63 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Power-law fit `p(t) ≈ C·t^{-β}` by least squares on log–log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub beta_hat: f64,
    /// Standard error of the fitted slope.
    pub stderr: f64,
    /// Fitted `log C`.
    pub intercept: f64,
    pub points: usize,
}

pub fn tail_exponent_fit(curve: &[(f64, f64)], window: (f64, f64)) -> Result<TailFit> {
    let (t_min, t_max) = window;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(t, _)| *t >= t_min && *t <= t_max)
        .copied()
        .collect();
    if pts.len() < 5 {
        return invalid(format!(
            "tail fit needs at least 5 points in [{t_min}, {t_max}], found {}",
            pts.len()
        ));
    }
    if let Some((t, _)) = pts.iter().find(|(t, p)| *p <= 0.0 || *t <= 0.0) {
        return invalid(format!("tail fit needs positive t and p, got a zero at t={t}"));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    ensure(sxx > 0.0, || "tail fit window holds a single time".into())?;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(TailFit {
        beta_hat: -slope,
        stderr,
        intercept,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn ks_single_point() {
        let s = EmpiricalSample::from_values(vec![0.5]).unwrap();
        assert_eq!(ks_distance(&s, uniform_cdf), 0.5);
    }

    #[test]
    fn ks_two_points() {
        // Gaps: F(.25)-0=.25, .5-.25=.25, F(.75)-.5=.25, 1-.75=.25
        let s = EmpiricalSample::from_values(vec![0.75, 0.25]).unwrap();
        assert!((ks_distance(&s, uniform_cdf) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_exact_quantiles() {
        let v: Vec<f64> = (1..=100).map(|k| (k as f64 - 0.5) / 100.0).collect();
        let s = EmpiricalSample::from_values(v).unwrap();
        assert!((ks_distance(&s, uniform_cdf) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(EmpiricalSample::from_values(vec![]).is_err());
    }

    #[test]
    fn two_sample_identical_is_zero_and_disjoint_is_one() {
        let a = EmpiricalSample::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = EmpiricalSample::from_values(vec![4.0, 5.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let c = EmpiricalSample::from_values(vec![1.5, 2.5]).unwrap();
        // after 1: 1/3 vs 0; after 1.5: 1/3 vs 1/2; after 2: 2/3 vs 1/2 ...
        assert!((ks_two_sample(&a, &c) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_recovered() {
        let curve: Vec<(f64, f64)> = (1..=100)
            .map(|k| {
                let t = 10.0 * k as f64;
                (t, t.powf(-0.5))
            })
            .collect();
        let fit = tail_exponent_fit(&curve, (10.0, 1000.0)).unwrap();
        assert!((fit.beta_hat - 0.5).abs() < 1e-12);
        let curve: Vec<(f64, f64)> = (1..=100)
            .map(|k| {
                let t = 10.0 * k as f64;
                (t, 3.0 / t)
            })
            .collect();
        let fit = tail_exponent_fit(&curve, (10.0, 1000.0)).unwrap();
        assert!((fit.beta_hat - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tail_fit_preconditions() {
        let few: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, 1.0 / k as f64)).collect();
        assert!(tail_exponent_fit(&few, (0.0, 10.0)).is_err());
        let mut zero: Vec<(f64, f64)> = (1..=6).map(|k| (k as f64, 1.0 / k as f64)).collect();
        zero[3].1 = 0.0;
        assert!(tail_exponent_fit(&zero, (0.0, 10.0)).is_err());
    }

    #[test]
    fn quantiles() {
        let s = EmpiricalSample::from_values(vec![3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.median(), 2.5);
        assert_eq!(s.quantile(0.0), 1.0);
        assert_eq!(s.quantile(1.0), 4.0);
    }

    proptest! {
        #[test]
        fn ks_invariant_under_monotone_transform(
            v in prop::collection::vec(0.001f64..0.999, 1..200)
        ) {
            // Direct distance against Uniform vs distance of exp(values)
            // against the pushed-forward CDF.
            let s = EmpiricalSample::from_values(v.clone()).unwrap();
            let direct = ks_distance(&s, uniform_cdf);
            let t = s.map(f64::exp).unwrap();
            let pushed = ks_distance(&t, |y| uniform_cdf(y.ln()));
            prop_assert!((direct - pushed).abs() < 1e-12);
        }

        #[test]
        fn noise_free_power_law(beta in 0.05f64..3.0, logc in -3.0f64..3.0) {
            let curve: Vec<(f64, f64)> = (0..40)
                .map(|k| {
                    let t = 10f64.powf(1.0 + k as f64 / 20.0);
                    (t, (logc - beta * t.ln()).exp())
                })
                .collect();
            let fit = tail_exponent_fit(&curve, (10.0, 1000.0)).unwrap();
            prop_assert!((fit.beta_hat - beta).abs() < 1e-10);
        }
    }
}
