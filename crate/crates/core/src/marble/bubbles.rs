use serde::{Deserialize, Serialize};

use super::{simulate_marble, MarbleConfig, MarbleTrace, MergeRule};
use crate::analysis::{ks_two_sample, lambda_params, EmpiricalSample};
use crate::error::{ensure, invalid, Result};
use crate::exec::Executor;
use crate::rbessel::RateFunction;
use crate::stochastics::{tags, RngStream};
use crate::vein::{replicate_bubbles, Bubble, BubbleConfig, DeathKind};

/// Every bubble id of a trace with its boundary samples at the kept fronts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleSet {
    /// Indexed by bubble id. Bubbles that lived entirely between two kept
    /// fronts have no boundary samples.
    pub bubbles: Vec<Bubble>,
}

impl BubbleSet {
    pub fn censored(&self) -> impl Iterator<Item = &Bubble> {
        self.bubbles.iter().filter(|b| b.death_kind == DeathKind::Censored)
    }

    pub fn count(&self, kind: DeathKind) -> usize {
        self.bubbles.iter().filter(|b| b.death_kind == kind).count()
    }
}

pub fn extract_bubbles(trace: &MarbleTrace) -> Result<BubbleSet> {
    ensure(!trace.fronts.is_empty(), || "trace has no fronts".into())?;
    if trace.bubbles.is_empty() {
        return invalid("trace was simulated without bubble tracking");
    }
    let horizon = trace.grid.t1();
    let mut bubbles: Vec<Bubble> = trace
        .bubbles
        .iter()
        .map(|life| Bubble {
            sigma: life.sigma,
            tau: life.tau.unwrap_or(horizon),
            times: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            death_kind: life.death_kind.unwrap_or(DeathKind::Censored),
        })
        .collect();
    for front in &trace.fronts {
        for (i, &id) in front.gap_ids.iter().enumerate() {
            let b = bubbles
                .get_mut(id as usize)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown bubble id {id}")))?;
            b.times.push(front.time);
            b.lower.push(front.positions[i]);
            b.upper.push(front.positions[i + 1]);
        }
    }
    Ok(BubbleSet { bubbles })
}

/// Marble-versus-vein comparison of the bubble height at `z = (t, mid-window)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckConfig {
    pub lambda: f64,
    pub n: f64,
    pub t: f64,
    pub window: (f64, f64),
    pub delta: f64,
    pub dt: f64,
    pub margin: Option<f64>,
    /// Step of the vein oracle.
    pub vein_dt: f64,
    pub replicas: usize,
    pub merge_rule: MergeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub ks: f64,
    pub marble_heights: Vec<f64>,
    pub vein_heights: Vec<f64>,
    /// Replicas whose final front had no gap around `z`.
    pub missing: usize,
}

impl CrosscheckConfig {
    fn marble(&self) -> MarbleConfig {
        MarbleConfig {
            rate: RateFunction::truncated(self.lambda, self.n),
            window: self.window,
            horizon: self.t,
            dt: self.dt,
            delta: self.delta,
            margin: self.margin,
            record_every: 0,
            log_events: false,
            track_bubbles: false,
            merge_rule: self.merge_rule,
        }
    }
}

/// Heights `U − L` of the marble gap containing `x` at the final time.
pub fn marble_heights_at(cfg: &MarbleConfig, x: f64, replicas: usize, seed: u64, exec: Executor) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    exec.try_map(replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::MARBLE, i as u64);
        let tr = simulate_marble(cfg, &mut rng)?;
        Ok(tr.final_front().gap_containing(x).map(|(l, u, _)| u - l))
    })
}

pub fn marble_vs_vein_crosscheck(cfg: &CrosscheckConfig, seed: u64, exec: Executor) -> Result<CrosscheckReport> {
    let p = lambda_params(cfg.lambda)?;
    ensure(p.lambda < 6.0, || format!("cross-check needs lambda < 6, got {}", cfg.lambda))?;
    ensure(cfg.replicas > 0, || "need at least one replica".into())?;
    let x = 0.5 * (cfg.window.0 + cfg.window.1);
    let marble = marble_heights_at(&cfg.marble(), x, cfg.replicas, seed, exec)?;
    let missing = marble.iter().filter(|h| h.is_none()).count();
    let marble_heights: Vec<f64> = marble.into_iter().flatten().collect();
    let vein = replicate_bubbles(
        &BubbleConfig {
            rate: RateFunction::truncated(cfg.lambda, cfg.n),
            t: cfg.t,
            x,
            dt: cfg.vein_dt,
            continuation_horizon: None,
        },
        cfg.replicas,
        seed,
        exec,
    )?;
    let vein_heights: Vec<f64> = vein.iter().map(|b| b.height()).collect();
    let ks = ks_two_sample(
        &EmpiricalSample::from_values(marble_heights.clone())?,
        &EmpiricalSample::from_values(vein_heights.clone())?,
    );
    Ok(CrosscheckReport {
        ks,
        marble_heights,
        vein_heights,
        missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub n: f64,
    /// Mean over replicas and kept fronts of the fraction of the window
    /// covered by gaps taller than the resolution.
    pub area_fraction: f64,
    /// Height of the gap containing the window midpoint at the horizon.
    pub heights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda: f64,
    pub resolution: f64,
    pub levels: Vec<ConvergenceLevel>,
    pub area_decreasing: bool,
    /// Relative change of the area fraction between the last two levels.
    pub last_relative_change: f64,
    /// Two-sample KS between the height samples of the last two levels.
    pub last_height_ks: f64,
}

/// Fraction of `[lo, hi]` covered by gaps taller than `resolution`.
fn covered_fraction(positions: &[f64], lo: f64, hi: f64, resolution: f64) -> f64 {
    let covered: f64 = positions
        .windows(2)
        .filter(|w| w[1] - w[0] > resolution)
        .map(|w| (w[1].min(hi) - w[0].max(lo)).max(0.0))
        .sum();
    covered / (hi - lo)
}

/// Marbles for `R_n = (λ/g²) ∧ n` along `levels`, replica `i` using the
/// same stream at every level.
pub fn truncation_convergence(
    lambda: f64,
    base: &MarbleConfig,
    levels: &[f64],
    resolution: f64,
    replicas: usize,
    seed: u64,
    exec: Executor,
) -> Result<ConvergenceReport> {
    lambda_params(lambda)?;
    ensure(levels.len() >= 2, || "truncation convergence needs at least two levels".into())?;
    ensure(replicas > 0, || "need at least one replica".into())?;
    let (lo, hi) = base.window;
    let mid = 0.5 * (lo + hi);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let mut cfg = base.clone();
        cfg.rate = RateFunction::truncated(lambda, n);
        cfg.log_events = false;
        cfg.track_bubbles = false;
        if cfg.record_every == 0 {
            cfg.record_every = 1;
        }
        cfg.validate()?;
        let per = exec.try_map(replicas, |i| {
            let mut rng = RngStream::derive(seed, tags::MARBLE, i as u64);
            let tr = simulate_marble(&cfg, &mut rng)?;
            let kept: Vec<_> = tr.fronts.iter().filter(|f| f.time > 0.0).collect();
            let area = kept
                .iter()
                .map(|f| covered_fraction(&f.positions, lo, hi, resolution))
                .sum::<f64>()
                / kept.len() as f64;
            Ok::<_, crate::Error>((area, tr.final_front().gap_containing(mid).map(|(l, u, _)| u - l)))
        })?;
        out.push(ConvergenceLevel {
            n,
            area_fraction: per.iter().map(|p| p.0).sum::<f64>() / replicas as f64,
            heights: per.iter().filter_map(|p| p.1).collect(),
        });
    }
    let k = out.len();
    let (a, b) = (&out[k - 2], &out[k - 1]);
    let last_relative_change = (b.area_fraction - a.area_fraction).abs() / a.area_fraction.max(f64::MIN_POSITIVE);
    let last_height_ks = match (
        EmpiricalSample::from_values(a.heights.clone()),
        EmpiricalSample::from_values(b.heights.clone()),
    ) {
        (Ok(x), Ok(y)) => ks_two_sample(&x, &y),
        _ => 1.0,
    };
    Ok(ConvergenceReport {
        lambda,
        resolution,
        area_decreasing: out.windows(2).all(|w| w[1].area_fraction < w[0].area_fraction),
        levels: out,
        last_relative_change,
        last_height_ks,
    })
}
