use serde::{Deserialize, Serialize};

use super::{simulate_endpoint, RBesselPath, RateFunction};
use crate::analysis::{median, quantile_sorted};
use crate::error::{ensure, invalid, Result};
use crate::exec::Executor;
use crate::stochastics::{tags, RngStream};

/// Excursions away from 0 of a recorded path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    /// Completed excursions `E_1, E_2, …` in order.
    pub durations: Vec<f64>,
    /// Time from the last zero to the end of the grid (the censored last
    /// excursion), if the path has a zero at all.
    pub open_tail: Option<f64>,
    pub query_t: f64,
    /// Start of the excursion straddling `query_t`.
    pub sigma_t: Option<f64>,
    /// Index of that excursion, so that `S_{k−1} = σ_t ≤ t`.
    pub k_t: usize,
}

impl ExcursionRecord {
    /// Partial sums `S_1, S_2, …` measured from the first zero.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.durations
            .iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect()
    }
}

pub fn excursions(path: &RBesselPath, query_t: f64) -> Result<ExcursionRecord> {
    let grid = &path.grid;
    if grid.index_of(query_t).is_none() {
        return invalid(format!(
            "query time {query_t} lies outside the path's grid [{}, {}]",
            grid.t0,
            grid.t1()
        ));
    }
    let starts_at_zero = path.x.first() == Some(&0.0);
    let zeros: Vec<f64> = starts_at_zero
        .then_some(grid.t0)
        .into_iter()
        .chain(path.jump_times.iter().copied())
        .collect();
    let durations = zeros.windows(2).map(|w| w[1] - w[0]).collect();
    let k_t = zeros.iter().filter(|&&z| z <= query_t).count();
    Ok(ExcursionRecord {
        durations,
        open_tail: zeros.last().map(|z| grid.t1() - z),
        query_t,
        sigma_t: k_t.checked_sub(1).map(|k| zeros[k]),
        k_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxExcursionReport {
    pub lambda: f64,
    pub horizon: f64,
    pub quantile: f64,
    pub levels: Vec<f64>,
    /// Empirical quantile of `max_{i ≤ k(t)} E_i` at each level.
    pub quantiles: Vec<f64>,
    /// Whether the quantiles strictly decrease along the ladder.
    pub decreasing: bool,
}

/// How far past the horizon the straddling excursion is followed before
/// being censored, as a multiple of the horizon.
const STRADDLE_CAP: f64 = 10.0;

/// One truncation level of a [`ladder_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: f64,
    pub median_x: f64,
    /// Empirical quantile of `max_{i ≤ k(t)} E_i`.
    pub max_excursion_quantile: f64,
    /// `X_t` per replica, in replica order.
    pub x: Vec<f64>,
    /// Longest excursion per replica, in replica order.
    pub max_excursion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSweep {
    pub lambda: f64,
    pub horizon: f64,
    pub quantile: f64,
    pub levels: Vec<LevelSummary>,
}

impl LadderSweep {
    pub fn medians_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].median_x < w[0].median_x)
    }

    pub fn quantiles_decreasing(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].max_excursion_quantile < w[0].max_excursion_quantile)
    }
}

/// Independent runs from 0 for `R = (λ/g²) ∧ n` at every level `n`, level
/// `li` replica `i` using the stream keyed by `(li, i)`. The excursion
/// straddling `horizon` is followed up to `10·horizon`.
pub fn ladder_sweep(
    lambda: f64,
    levels: &[f64],
    horizon: f64,
    replicas: usize,
    quantile: f64,
    seed: u64,
    exec: Executor,
) -> Result<LadderSweep> {
    ensure(lambda >= 0.0, || format!("lambda must be nonnegative, got {lambda}"))?;
    ensure(!levels.is_empty(), || "need at least one truncation level".into())?;
    ensure(replicas > 0, || "need at least one replica".into())?;
    ensure((0.0..=1.0).contains(&quantile), || format!("quantile {quantile} outside [0, 1]"))?;
    let mut out = Vec::with_capacity(levels.len());
    for (li, &n) in levels.iter().enumerate() {
        let rate = RateFunction::truncated(lambda, n);
        rate.validate()?;
        let runs = exec.try_map(replicas, |i| {
            let mut rng = RngStream::derive_keyed(seed, tags::LADDER, li as u64, i as u64);
            simulate_endpoint(&rate, 0.0, horizon, Some(STRADDLE_CAP * horizon), &mut rng)
        })?;
        let x: Vec<f64> = runs.iter().map(|r| r.x_t).collect();
        let max_excursion: Vec<f64> = runs.iter().map(|r| r.max_excursion).collect();
        let mut sorted = max_excursion.clone();
        sorted.sort_by(f64::total_cmp);
        out.push(LevelSummary {
            n,
            median_x: median(&x),
            max_excursion_quantile: quantile_sorted(&sorted, quantile),
            x,
            max_excursion,
        });
    }
    Ok(LadderSweep {
        lambda,
        horizon,
        quantile,
        levels: out,
    })
}

/// Per truncation level, the empirical `quantile` of the longest excursion
/// up to and including the one straddling `horizon`, from independent runs
/// started at 0.
pub fn max_excursion_supercritical(
    lambda: f64,
    levels: &[f64],
    horizon: f64,
    replicas: usize,
    quantile: f64,
    seed: u64,
    exec: Executor,
) -> Result<MaxExcursionReport> {
    ensure(lambda >= 6.0, || {
        format!("maximal excursions shrink only for lambda >= 6, got {lambda}")
    })?;
    let sweep = ladder_sweep(lambda, levels, horizon, replicas, quantile, seed, exec)?;
    Ok(MaxExcursionReport {
        lambda,
        horizon,
        quantile,
        levels: levels.to_vec(),
        decreasing: sweep.quantiles_decreasing(),
        quantiles: sweep.levels.iter().map(|l| l.max_excursion_quantile).collect(),
    })
}
