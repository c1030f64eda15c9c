//! The R-vein `(L, C, U)`: a central Brownian path `C` with lower and upper
//! Brownian paths reflected off it, both collapsing onto `C` at rate
//! `R(U − L)`, and the bubble containing a space-time point.
//!
//! `C`, `W_L` and `W_U` are independent unit Brownian motions. The gaps
//! `U − C` and `C − L` are the Skorokhod reflections of `W_U − C` and
//! `C − W_L`; each gap moves by an exact reflected transition over every
//! sub-step (grid step or stretch up to the next fragmentation candidate).

use serde::{Deserialize, Serialize};

use crate::analysis::{ks_distance, pearson, lambda_params, EmpiricalSample};
use crate::error::{ensure, invalid, Result};
use crate::exec::Executor;
use crate::rbessel::RateFunction;
use crate::report::LawCheck;
use crate::stochastics::{gamma_cdf, reflected_step, tags, RngStream, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathKind {
    /// `L` and `U` met.
    Coalesced,
    /// A fragmentation event split the bubble.
    Fragmented,
    /// Still alive at the continuation horizon.
    Censored,
}

impl DeathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Coalesced => "coalesced",
            Self::Fragmented => "fragmented",
            Self::Censored => "censored",
        }
    }
}

/// `(L, U)` after the query time, up to the bubble's death.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    /// Recording times; the first is the query time, the last is `tau`.
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub tau: f64,
    pub death_kind: DeathKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeinPath {
    pub grid: TimeGrid,
    pub lower: Vec<f64>,
    pub center: Vec<f64>,
    pub upper: Vec<f64>,
    pub jump_times: Vec<f64>,
    /// Position of `C` at each jump.
    pub jump_positions: Vec<f64>,
    pub continuation: Option<Continuation>,
    pub rate: RateFunction,
    pub seed: u64,
    pub stream_id: u64,
}

impl VeinPath {
    fn shift(&mut self, by: f64) {
        for v in self
            .lower
            .iter_mut()
            .chain(self.center.iter_mut())
            .chain(self.upper.iter_mut())
            .chain(self.jump_positions.iter_mut())
        {
            *v += by;
        }
        if let Some(c) = &mut self.continuation {
            for v in c.lower.iter_mut().chain(c.upper.iter_mut()) {
                *v += by;
            }
        }
    }
}

/// Maximal space-time region `{σ < s < τ, L_s < y < U_s}` free of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub sigma: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub death_kind: DeathKind,
}

impl Bubble {
    /// `U_s − L_s`, linearly interpolated between recording times; zero
    /// outside `[σ, τ]`.
    pub fn height_at(&self, s: f64) -> f64 {
        if s < self.sigma || s > self.tau || self.times.is_empty() {
            return 0.0;
        }
        let k = self.times.partition_point(|&u| u <= s);
        if k == 0 {
            return self.upper[0] - self.lower[0];
        }
        if k == self.times.len() {
            return self.upper[k - 1] - self.lower[k - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (s - t0) / (t1 - t0) } else { 0.0 };
        let h0 = self.upper[k - 1] - self.lower[k - 1];
        let h1 = self.upper[k] - self.lower[k];
        h0 + w * (h1 - h0)
    }
}

/// The vein triple between events.
struct VeinState<'a> {
    rate: &'a RateFunction,
    bound: f64,
    lower_gap: f64,
    upper_gap: f64,
    c: f64,
    t: f64,
    next_candidate: f64,
}

fn wait(bound: f64, rng: &mut RngStream) -> f64 {
    if bound > 0.0 {
        rng.exponential(bound)
    } else {
        f64::INFINITY
    }
}

impl<'a> VeinState<'a> {
    fn new(rate: &'a RateFunction, start: (f64, f64, f64), t0: f64, rng: &mut RngStream) -> Result<Self> {
        let bound = rate.require_bound()?;
        let (l, c, u) = start;
        ensure(l <= c && c <= u && l.is_finite() && u.is_finite(), || {
            format!("vein start must satisfy l <= c <= u, got ({l}, {c}, {u})")
        })?;
        Ok(Self {
            rate,
            bound,
            lower_gap: c - l,
            upper_gap: u - c,
            c,
            t: t0,
            next_candidate: t0 + wait(bound, rng),
        })
    }

    fn gap(&self) -> f64 {
        self.lower_gap + self.upper_gap
    }

    fn diffuse(&mut self, dt: f64, rng: &mut RngStream) {
        if dt <= 0.0 {
            return;
        }
        let s = dt.sqrt();
        let dc = s * rng.normal();
        let du = s * rng.normal();
        let dl = s * rng.normal();
        self.upper_gap = reflected_step(self.upper_gap, du - dc, 2.0 * dt, rng);
        self.lower_gap = reflected_step(self.lower_gap, dc - dl, 2.0 * dt, rng);
        self.c += dc;
    }

    fn advance_to(&mut self, t_end: f64, rng: &mut RngStream, mut on_jump: impl FnMut(f64, f64)) {
        while self.next_candidate <= t_end {
            self.diffuse(self.next_candidate - self.t, rng);
            self.t = self.next_candidate;
            if rng.unit() * self.bound < self.rate.eval(self.gap()) {
                self.lower_gap = 0.0;
                self.upper_gap = 0.0;
                on_jump(self.t, self.c);
            }
            self.next_candidate = self.t + wait(self.bound, rng);
        }
        self.diffuse(t_end - self.t, rng);
        self.t = t_end;
    }
}

pub fn simulate_vein(
    rate: &RateFunction,
    start: (f64, f64, f64),
    grid: TimeGrid,
    rng: &mut RngStream,
) -> Result<VeinPath> {
    let mut state = VeinState::new(rate, start, grid.t0, rng)?;
    let n = grid.len();
    let (mut lower, mut center, mut upper) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut jump_times, mut jump_positions) = (Vec::new(), Vec::new());
    lower.push(start.0);
    center.push(start.1);
    upper.push(start.2);
    for k in 1..n {
        state.advance_to(grid.time(k), rng, |t, c| {
            jump_times.push(t);
            jump_positions.push(c);
        });
        lower.push(state.c - state.lower_gap);
        center.push(state.c);
        upper.push(state.c + state.upper_gap);
    }
    Ok(VeinPath {
        grid,
        lower,
        center,
        upper,
        jump_times,
        jump_positions,
        continuation: None,
        rate: rate.clone(),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    })
}

/// Options for following the bubble past its query time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Step used to follow `(L, U)`.
    pub dt: f64,
    /// Latest time followed; a bubble alive then is [`DeathKind::Censored`].
    pub horizon: f64,
}

/// `L` and `U` as independent Brownian motions from `(l, u)` at time `t`,
/// killed when they meet or at the first accepted fragmentation.
///
/// A meeting is detected either as a sign change of `U − L` over a step,
/// placed by linear interpolation, or through the Brownian-bridge
/// probability `exp(−g₀g₁/h)` that the gap touched 0 between two positive
/// endpoints.
fn follow_continuation(
    rate: &RateFunction,
    bound: f64,
    (mut l, mut u): (f64, f64),
    mut t: f64,
    opts: ContinuationOptions,
    rng: &mut RngStream,
    mut record: impl FnMut(f64, f64, f64),
) -> (f64, DeathKind) {
    let mut next_candidate = t + wait(bound, rng);
    record(t, l, u);
    loop {
        if t >= opts.horizon {
            return (t, DeathKind::Censored);
        }
        let grid_next = (t + opts.dt).min(opts.horizon);
        let is_candidate = next_candidate <= grid_next;
        let t_next = if is_candidate { next_candidate } else { grid_next };
        let h = t_next - t;
        let s = h.sqrt();
        let dl = s * rng.normal();
        let du = s * rng.normal();
        let g0 = u - l;
        let g1 = g0 + du - dl;
        let meet = if g1 <= 0.0 {
            Some(g0 / (g0 - g1))
        } else if h > 0.0 && rng.unit() < (-g0 * g1 / h).exp() {
            Some(g0 / (g0 + g1))
        } else {
            None
        };
        if let Some(w) = meet {
            let tau = t + w * h;
            let y = l + w * dl;
            record(tau, y, y);
            return (tau, DeathKind::Coalesced);
        }
        l += dl;
        u += du;
        t = t_next;
        if is_candidate {
            next_candidate = t + wait(bound, rng);
            if rng.unit() * bound < rate.eval(u - l) {
                record(t, l, u);
                return (t, DeathKind::Fragmented);
            }
        }
        if !is_candidate || t >= opts.horizon {
            record(t, l, u);
        }
    }
}

/// The standard vein to `z = (t, x)` on `grid = [0, t]`, recentred so that
/// `C_t = x`, with its continuation and the bubble containing `z`.
pub fn bubble_at_point(
    rate: &RateFunction,
    x: f64,
    grid: TimeGrid,
    continuation: ContinuationOptions,
    rng: &mut RngStream,
) -> Result<(VeinPath, Bubble)> {
    let t = grid.t1();
    ensure(grid.t0 == 0.0, || "the vein to a point starts at time 0".into())?;
    check_continuation(t, &continuation)?;
    let mut path = simulate_vein(rate, (0.0, 0.0, 0.0), grid, rng)?;
    let bound = rate.require_bound()?;
    let last = grid.n_steps;
    let (mut times, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    let (tau, death_kind) = follow_continuation(
        rate,
        bound,
        (path.lower[last], path.upper[last]),
        t,
        continuation,
        rng,
        |s, l, u| {
            times.push(s);
            lower.push(l);
            upper.push(u);
        },
    );
    path.continuation = Some(Continuation {
        times,
        lower,
        upper,
        tau,
        death_kind,
    });
    path.shift(x - path.center[last]);

    let (sigma, sigma_pos) = match (path.jump_times.last(), path.jump_positions.last()) {
        (Some(&s), Some(&c)) => (s, c),
        _ => (0.0, path.center[0]),
    };
    let mut bubble = Bubble {
        sigma,
        tau,
        times: vec![sigma],
        lower: vec![sigma_pos],
        upper: vec![sigma_pos],
        death_kind,
    };
    let first = grid.times().position(|s| s > sigma).unwrap_or(last);
    for k in first..last {
        bubble.times.push(grid.time(k));
        bubble.lower.push(path.lower[k]);
        bubble.upper.push(path.upper[k]);
    }
    let cont = path.continuation.as_ref().expect("continuation just set");
    bubble.times.extend(&cont.times);
    bubble.lower.extend(&cont.lower);
    bubble.upper.extend(&cont.upper);
    Ok((path, bubble))
}

fn check_continuation(t: f64, opts: &ContinuationOptions) -> Result<()> {
    ensure(t > 0.0, || format!("query time must be positive, got {t}"))?;
    ensure(opts.dt > 0.0, || format!("continuation step must be positive, got {}", opts.dt))?;
    ensure(opts.horizon >= t, || {
        format!("continuation horizon {} precedes the query time {t}", opts.horizon)
    })
}

/// The bubble containing `z = (t, x)` without recording paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleSample {
    pub l_t: f64,
    pub c_t: f64,
    pub u_t: f64,
    pub sigma: f64,
    pub tau: f64,
    pub death_kind: DeathKind,
    pub n_jumps: u64,
}

impl BubbleSample {
    pub fn height(&self) -> f64 {
        self.u_t - self.l_t
    }
}

/// Experiment description for [`sample_bubble`] and [`replicate_bubbles`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfig {
    pub rate: RateFunction,
    /// Query point `(t, x)`.
    pub t: f64,
    pub x: f64,
    /// Step of the vein grid on `[0, t]` and of the continuation.
    pub dt: f64,
    /// `None` stops at `t` (no continuation; `tau` is then `t` and the kind
    /// [`DeathKind::Censored`]).
    pub continuation_horizon: Option<f64>,
}

pub fn sample_bubble(cfg: &BubbleConfig, rng: &mut RngStream) -> Result<BubbleSample> {
    let grid = TimeGrid::with_step(0.0, cfg.t, cfg.dt)?;
    let mut state = VeinState::new(&cfg.rate, (0.0, 0.0, 0.0), 0.0, rng)?;
    let mut sigma = 0.0;
    let mut n_jumps = 0;
    for k in 1..grid.len() {
        state.advance_to(grid.time(k), rng, |s, _| {
            sigma = s;
            n_jumps += 1;
        });
    }
    let shift = cfg.x - state.c;
    let (l, u) = (state.c - state.lower_gap, state.c + state.upper_gap);
    let (tau, death_kind) = match cfg.continuation_horizon {
        Some(horizon) => {
            let opts = ContinuationOptions { dt: cfg.dt, horizon };
            check_continuation(cfg.t, &opts)?;
            follow_continuation(&cfg.rate, state.bound, (l, u), cfg.t, opts, rng, |_, _, _| {})
        }
        None => (cfg.t, DeathKind::Censored),
    };
    Ok(BubbleSample {
        l_t: l + shift,
        c_t: cfg.x,
        u_t: u + shift,
        sigma,
        tau,
        death_kind,
        n_jumps,
    })
}

/// Independent bubbles; replica `i` uses stream `i` under the vein tag.
pub fn replicate_bubbles(cfg: &BubbleConfig, replicas: usize, seed: u64, exec: Executor) -> Result<Vec<BubbleSample>> {
    cfg.rate.require_bound()?;
    ensure(replicas > 0, || "need at least one replica".into())?;
    exec.try_map(replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::VEIN, i as u64);
        sample_bubble(cfg, &mut rng)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// KS distance of `(C_t − L_t)/(U_t − L_t)` from Uniform(0, 1).
    pub ks: f64,
    /// Pearson correlation of that ratio with `U_t − L_t`.
    pub correlation: f64,
    pub used: usize,
    pub degenerate: usize,
}

/// Position of the centre inside the bubble at the final time of each vein.
pub fn uniformity_check(paths: &[(f64, f64, f64)]) -> Result<UniformityReport> {
    let (mut ratios, mut gaps) = (Vec::new(), Vec::new());
    for &(l, c, u) in paths {
        if u > l {
            ratios.push((c - l) / (u - l));
            gaps.push(u - l);
        }
    }
    if ratios.is_empty() {
        return invalid("every vein has a degenerate interval U_t = L_t");
    }
    let correlation = if ratios.len() > 1 { pearson(&ratios, &gaps).unwrap_or(0.0) } else { 0.0 };
    let sample = EmpiricalSample::from_values(ratios)?;
    Ok(UniformityReport {
        ks: ks_distance(&sample, |v| v.clamp(0.0, 1.0)),
        correlation,
        used: sample.len(),
        degenerate: paths.len() - sample.len(),
    })
}

/// Final `(L, C, U)` of a recorded vein.
pub fn endpoint_triple(path: &VeinPath) -> (f64, f64, f64) {
    let k = path.grid.n_steps;
    (path.lower[k], path.center[k], path.upper[k])
}

/// `X_t²/(2(t − σ))` with `X = (U − L)/√2`, against Gamma(α/2 + 1).
pub fn conditioned_bessel_check(samples: &[BubbleSample], lambda: f64, t: f64, threshold: f64) -> Result<LawCheck> {
    let p = lambda_params(lambda)?;
    ensure(lambda < 6.0, || format!("conditioned endpoint law needs lambda < 6, got {lambda}"))?;
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| s.sigma < t)
        .map(|s| s.height().powi(2) / (4.0 * (t - s.sigma)))
        .collect();
    let sample = EmpiricalSample::from_values(values)?;
    let shape = p.endpoint_shape();
    let ks = ks_distance(&sample, |v| gamma_cdf(shape, 1.0, v));
    Ok(LawCheck::below(ks, threshold)
        .with("shape", shape)
        .with("n", sample.len()))
}
