use std::f64::consts::SQRT_2;

use super::{check_start, RBesselPath, RateFunction};
use crate::error::{ensure, Result};
use crate::stochastics::{bessel3_quantile, RngStream, TimeGrid};

/// Coupled processes for `R_n = (λ/g²) ∧ n`, one per level.
///
/// All levels see the same Poisson(max n) candidate stream with one shared
/// uniform mark, and between events every level moves by the Bessel-3
/// transition quantile of one shared standard normal. The quantile map is
/// monotone in the starting point, so levels never cross, and levels that
/// meet stay together until a jump separates them.
struct Ladder {
    rates: Vec<RateFunction>,
    bound: f64,
    x: Vec<f64>,
    t: f64,
    next_candidate: f64,
}

impl Ladder {
    fn new(lambda: f64, x0: f64, t0: f64, levels: &[f64], rng: &mut RngStream) -> Result<Self> {
        ensure(!levels.is_empty(), || "truncation ladder needs at least one level".into())?;
        ensure(levels.windows(2).all(|w| w[0] < w[1]), || {
            format!("truncation levels must be strictly increasing, got {levels:?}")
        })?;
        check_start(x0)?;
        let rates: Vec<RateFunction> = levels.iter().map(|&n| RateFunction::truncated(lambda, n)).collect();
        for r in &rates {
            r.validate()?;
        }
        let bound = rates.last().and_then(RateFunction::bound).unwrap_or(0.0);
        let mut ladder = Self {
            rates,
            bound,
            x: vec![x0; levels.len()],
            t: t0,
            next_candidate: f64::INFINITY,
        };
        ladder.next_candidate = t0 + ladder.wait(rng);
        Ok(ladder)
    }

    fn wait(&self, rng: &mut RngStream) -> f64 {
        if self.bound > 0.0 {
            rng.exponential(self.bound)
        } else {
            f64::INFINITY
        }
    }

    fn diffuse(&mut self, dt: f64, rng: &mut RngStream) {
        if dt <= 0.0 {
            return;
        }
        let s = dt.sqrt();
        let z = rng.normal();
        let mut prev_old = f64::NAN;
        let mut prev_new = f64::INFINITY;
        for xi in self.x.iter_mut() {
            let old = *xi;
            let new = if old == prev_old {
                prev_new
            } else {
                bessel3_quantile(old, s, z).min(prev_new)
            };
            *xi = new;
            prev_old = old;
            prev_new = new;
        }
        self.t += dt;
    }

    fn advance_to(&mut self, t_end: f64, rng: &mut RngStream, mut on_jump: impl FnMut(usize, f64)) {
        while self.next_candidate <= t_end {
            self.diffuse(self.next_candidate - self.t, rng);
            self.t = self.next_candidate;
            let mark = rng.unit() * self.bound;
            for (i, (xi, r)) in self.x.iter_mut().zip(&self.rates).enumerate() {
                if mark < r.eval(SQRT_2 * *xi) {
                    *xi = 0.0;
                    on_jump(i, self.t);
                }
            }
            self.next_candidate = self.t + self.wait(rng);
        }
        self.diffuse(t_end - self.t, rng);
        self.t = t_end;
    }
}

/// One coupled path per level, in the order of `levels`.
pub fn simulate_truncation_ladder(
    lambda: f64,
    x0: f64,
    grid: TimeGrid,
    levels: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<RBesselPath>> {
    let mut ladder = Ladder::new(lambda, x0, grid.t0, levels, rng)?;
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); levels.len()];
    let mut jumps: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    for xi in xs.iter_mut() {
        xi.push(x0);
    }
    for k in 1..grid.len() {
        ladder.advance_to(grid.time(k), rng, |i, t| jumps[i].push(t));
        for (xi, &v) in xs.iter_mut().zip(&ladder.x) {
            xi.push(v);
        }
    }
    Ok(xs
        .into_iter()
        .zip(jumps)
        .zip(ladder.rates)
        .map(|((x, jump_times), rate)| RBesselPath {
            grid,
            x,
            jump_times,
            rate,
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        })
        .collect())
}

/// `X_t` of every level of one coupled replica started at `x0` at time 0.
pub fn truncation_ladder_endpoints(
    lambda: f64,
    x0: f64,
    horizon: f64,
    levels: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    ensure(horizon > 0.0, || format!("horizon must be positive, got {horizon}"))?;
    let mut ladder = Ladder::new(lambda, x0, 0.0, levels, rng)?;
    ladder.advance_to(horizon, rng, |_, _| {});
    Ok(ladder.x)
}
