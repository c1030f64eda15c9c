//! The R-Bessel process: a Bessel-3 diffusion that jumps to 0 at rate
//! `R(√2·X)`.
//!
//! Simulation is event driven. Candidate jump times form a Poisson stream of
//! rate `M = sup R`; between consecutive candidates (and grid points) the
//! state moves by an exact Bessel-3 transition, and a candidate is accepted
//! with probability `R(√2·X_{s−})/M` evaluated at the exact pre-jump state.
//! There is no discretisation error; the grid only selects where the path is
//! recorded.

mod excursion;
mod ladder;
mod laws;
mod rate;

pub use excursion::{
    excursions, ladder_sweep, max_excursion_supercritical, ExcursionRecord, LadderSweep, LevelSummary,
    MaxExcursionReport,
};
pub use laws::{endpoint_laws, EndpointLaws};
pub use ladder::{simulate_truncation_ladder, truncation_ladder_endpoints};
pub use rate::{QuadraticClass, RateFunction};

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::exec::Executor;
use crate::stochastics::{bessel3_step, tags, RngStream, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBesselPath {
    pub grid: TimeGrid,
    /// State at each grid time.
    pub x: Vec<f64>,
    /// Accepted jump times, increasing.
    pub jump_times: Vec<f64>,
    pub rate: RateFunction,
    pub seed: u64,
    pub stream_id: u64,
}

/// Poisson-thinned Bessel-3 state carried between events.
pub(crate) struct Thinned<'a> {
    rate: &'a RateFunction,
    bound: f64,
    pub(crate) x: f64,
    pub(crate) t: f64,
    next_candidate: f64,
}

impl<'a> Thinned<'a> {
    pub(crate) fn new(rate: &'a RateFunction, bound: f64, x0: f64, t0: f64, rng: &mut RngStream) -> Self {
        let mut s = Self {
            rate,
            bound,
            x: x0,
            t: t0,
            next_candidate: f64::INFINITY,
        };
        s.next_candidate = t0 + s.wait(rng);
        s
    }

    fn wait(&self, rng: &mut RngStream) -> f64 {
        if self.bound > 0.0 {
            rng.exponential(self.bound)
        } else {
            f64::INFINITY
        }
    }

    /// Advances to the next candidate if it falls at or before `t_end`;
    /// returns `Some(accepted)` in that case and `None` otherwise.
    fn candidate_before(&mut self, t_end: f64, rng: &mut RngStream) -> Option<bool> {
        if self.next_candidate > t_end {
            return None;
        }
        self.x = bessel3_step(self.x, self.next_candidate - self.t, rng);
        self.t = self.next_candidate;
        let accept = rng.unit() * self.bound < self.rate.eval(SQRT_2 * self.x);
        if accept {
            self.x = 0.0;
        }
        self.next_candidate = self.t + self.wait(rng);
        Some(accept)
    }

    /// Runs to `t_end`, reporting each accepted jump time.
    pub(crate) fn advance_to(&mut self, t_end: f64, rng: &mut RngStream, mut on_jump: impl FnMut(f64)) {
        while let Some(accepted) = self.candidate_before(t_end, rng) {
            if accepted {
                on_jump(self.t);
            }
        }
        if t_end > self.t {
            self.x = bessel3_step(self.x, t_end - self.t, rng);
            self.t = t_end;
        }
    }

    /// Runs until the first accepted jump, giving up at `t_cap`.
    pub(crate) fn next_jump(&mut self, t_cap: f64, rng: &mut RngStream) -> Option<f64> {
        while let Some(accepted) = self.candidate_before(t_cap, rng) {
            if accepted {
                return Some(self.t);
            }
        }
        None
    }
}

fn check_start(x0: f64) -> Result<()> {
    ensure(x0 >= 0.0 && x0.is_finite(), || {
        format!("starting point must be a finite nonnegative number, got {x0}")
    })
}

pub fn simulate_rbessel(
    rate: &RateFunction,
    x0: f64,
    grid: TimeGrid,
    rng: &mut RngStream,
) -> Result<RBesselPath> {
    let bound = rate.require_bound()?;
    check_start(x0)?;
    let mut state = Thinned::new(rate, bound, x0, grid.t0, rng);
    let mut x = Vec::with_capacity(grid.len());
    let mut jump_times = Vec::new();
    x.push(x0);
    for k in 1..grid.len() {
        state.advance_to(grid.time(k), rng, |t| jump_times.push(t));
        x.push(state.x);
    }
    Ok(RBesselPath {
        grid,
        x,
        jump_times,
        rate: rate.clone(),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    })
}

/// Summary of one run observed at a single time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointSample {
    pub x_t: f64,
    /// Last zero at or before `t`; `None` if the path started away from 0 and
    /// never jumped.
    pub sigma_t: Option<f64>,
    /// Accepted jumps in `(0, t]`.
    pub n_jumps: u64,
    /// Longest excursion among `E_1, …, E_{k(t)}`. The straddling excursion
    /// is followed past `t` when an extension cap is given, and is censored
    /// at the cap (or at `t` without extension).
    pub max_excursion: f64,
}

/// Runs from `x0` at time 0 to `horizon` keeping only the summary.
pub fn simulate_endpoint(
    rate: &RateFunction,
    x0: f64,
    horizon: f64,
    extend_to: Option<f64>,
    rng: &mut RngStream,
) -> Result<EndpointSample> {
    let bound = rate.require_bound()?;
    check_start(x0)?;
    ensure(horizon > 0.0, || format!("horizon must be positive, got {horizon}"))?;
    let mut state = Thinned::new(rate, bound, x0, 0.0, rng);
    let mut last_zero = (x0 == 0.0).then_some(0.0);
    let mut n_jumps = 0u64;
    let mut max_excursion = 0.0f64;
    state.advance_to(horizon, rng, |t| {
        if let Some(z) = last_zero {
            max_excursion = max_excursion.max(t - z);
        }
        last_zero = Some(t);
        n_jumps += 1;
    });
    let x_t = state.x;
    if let Some(z) = last_zero {
        let end = match extend_to {
            Some(cap) if cap > horizon => state.next_jump(cap, rng).unwrap_or(cap),
            _ => horizon,
        };
        max_excursion = max_excursion.max(end - z);
    }
    Ok(EndpointSample {
        x_t,
        sigma_t: last_zero,
        n_jumps,
        max_excursion,
    })
}

/// Independent endpoint replicas; replica `i` uses stream `i` under the
/// R-Bessel tag, so results are identical for every executor.
pub fn replicate_endpoints(
    rate: &RateFunction,
    x0: f64,
    horizon: f64,
    extend_to: Option<f64>,
    replicas: usize,
    seed: u64,
    exec: Executor,
) -> Result<Vec<EndpointSample>> {
    rate.require_bound()?;
    ensure(replicas > 0, || "need at least one replica".into())?;
    exec.try_map(replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::RBESSEL, i as u64);
        simulate_endpoint(rate, x0, horizon, extend_to, &mut rng)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub horizon: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// First jump time of the process started at 0, or `None` if it exceeds `cap`.
pub fn first_jump_time(rate: &RateFunction, cap: f64, rng: &mut RngStream) -> Result<Option<f64>> {
    let bound = rate.require_bound()?;
    Ok(Thinned::new(rate, bound, 0.0, 0.0, rng).next_jump(cap, rng))
}

/// Fraction of runs from 0 with no jump in `(0, t]`, for every `t` in
/// `times`, estimated from the same replicas.
pub fn survival_curve(
    rate: &RateFunction,
    times: &[f64],
    replicas: usize,
    seed: u64,
    exec: Executor,
) -> Result<Vec<SurvivalEstimate>> {
    rate.require_bound()?;
    ensure(replicas > 0, || "survival estimate needs at least one replica".into())?;
    ensure(times.iter().all(|t| *t >= 0.0 && t.is_finite()), || {
        "survival times must be finite and nonnegative".into()
    })?;
    let cap = times.iter().copied().fold(0.0, f64::max);
    let firsts = exec.try_map(replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::RBESSEL, i as u64);
        first_jump_time(rate, cap, &mut rng)
    })?;
    let n = replicas as f64;
    Ok(times
        .iter()
        .map(|&t| {
            let alive = firsts.iter().filter(|f| f.is_none_or(|s| s > t)).count() as f64;
            let p = alive / n;
            SurvivalEstimate {
                horizon: t,
                p_hat: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
                replicas,
            }
        })
        .collect())
}

pub fn survival_probability(
    rate: &RateFunction,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    Ok(survival_curve(rate, &[horizon], replicas, seed, Executor::default())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbounded_rate_rejected() {
        let mut rng = RngStream::new(1, 0);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(simulate_rbessel(&RateFunction::power_law(3.0), 0.0, grid, &mut rng).is_err());
        assert!(simulate_rbessel(&RateFunction::constant(1.0), -1.0, grid, &mut rng).is_err());
    }

    #[test]
    fn path_resets_at_jumps_and_stays_positive_on_grid() {
        let mut rng = RngStream::new(2, 0);
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let p = simulate_rbessel(&RateFunction::truncated(3.0, 64.0), 0.0, grid, &mut rng).unwrap();
        assert!(!p.jump_times.is_empty());
        assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(p.x[1..].iter().all(|&x| x > 0.0));
        assert_eq!(p.x.len(), 1001);
    }

    #[test]
    fn survival_at_time_zero_is_one() {
        let e = survival_probability(&RateFunction::constant(5.0), 0.0, 100, 3).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert!(survival_probability(&RateFunction::constant(5.0), 1.0, 0, 3).is_err());
    }

    #[test]
    fn endpoint_without_jumps() {
        let mut rng = RngStream::new(3, 0);
        let s = simulate_endpoint(&RateFunction::constant(0.0), 0.0, 2.0, Some(5.0), &mut rng).unwrap();
        assert_eq!(s.n_jumps, 0);
        assert_eq!(s.sigma_t, Some(0.0));
        assert_eq!(s.max_excursion, 5.0);
        let s = simulate_endpoint(&RateFunction::constant(0.0), 1.0, 2.0, None, &mut rng).unwrap();
        assert_eq!(s.sigma_t, None);
        assert_eq!(s.max_excursion, 0.0);
    }
}
