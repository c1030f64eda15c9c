//! Finite-resolution R-marble: coalescing Brownian particles whose adjacent
//! gaps fragment at rate `R(gap)`, each fragmented gap being refilled with
//! fresh particles at spacing at most `δ`.
//!
//! One step of length `dt`:
//!
//! 1. every gap `g` fragments with probability `(1 − e^{−M·dt})·R(g)/M`
//!    (a Poisson(M) candidate thinned at the left state) and is refilled;
//! 2. every particle receives an independent `N(0, dt)` increment, except
//!    that each refill block (fresh particles with the two particles
//!    bounding them, or the whole front at time 0) is advanced in sub-steps
//!    whose spread is at most half the block's mean spacing (and at least
//!    `δ`), each followed by the sweep below;
//! 3. a left-to-right stack sweep merges adjacent particles whose order
//!    swapped and, for pairs that did not swap, merges them with the
//!    Brownian-bridge probability `exp(−a·b/dt)` that their gap touched 0
//!    during the step. The merged particle follows the left path
//!    ([`MergeRule::Left`]) or sits at the midpoint of the two end
//!    positions ([`MergeRule::Midpoint`]).
//!
//! A single sweep over a step much longer than `δ²` cannot tell in which
//! order a dense refill coalesced, and it shifts the refill's boundary
//! particles; the sub-steps remove that bias.
//!
//! Every gap carries the id of the bubble it belongs to. Merging two
//! particles ends only the bubble between them; a fragmentation ends the
//! fragmented bubble and starts one bubble per refilled micro-gap.

mod bubbles;

pub use bubbles::{
    extract_bubbles, marble_heights_at, marble_vs_vein_crosscheck, truncation_convergence, BubbleSet, CrosscheckConfig,
    CrosscheckReport, ConvergenceLevel, ConvergenceReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rbessel::RateFunction;
use crate::stochastics::{RngStream, TimeGrid};
use crate::vein::DeathKind;

/// Where two particles that met during a step end up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    /// The left particle keeps its path and absorbs the right one, so
    /// every survivor has followed its own path for the whole step.
    #[default]
    Left,
    /// The midpoint of the two end positions.
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarbleConfig {
    pub rate: RateFunction,
    /// Observation window `(x_min, x_max)`.
    pub window: (f64, f64),
    pub horizon: f64,
    pub dt: f64,
    /// Refill spacing.
    pub delta: f64,
    /// Extra width on each side of the window; defaults to `4√horizon`.
    pub margin: Option<f64>,
    /// Keep a front every this many steps (the final front is always kept);
    /// 0 keeps only the final front.
    pub record_every: usize,
    pub log_events: bool,
    /// Maintain the birth/death table of bubbles.
    pub track_bubbles: bool,
    #[serde(default)]
    pub merge_rule: MergeRule,
}

impl MarbleConfig {
    pub fn new(rate: RateFunction, window: (f64, f64), horizon: f64, delta: f64) -> Self {
        Self {
            rate,
            window,
            horizon,
            dt: 100.0 * delta * delta,
            delta,
            margin: None,
            record_every: 1,
            log_events: true,
            track_bubbles: true,
            merge_rule: MergeRule::Left,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or(4.0 * self.horizon.sqrt())
    }

    pub fn validate(&self) -> Result<f64> {
        let bound = self.rate.require_bound()?;
        ensure(self.delta > 0.0 && self.delta.is_finite(), || {
            format!("refill spacing must be positive, got {}", self.delta)
        })?;
        ensure(self.window.0 < self.window.1, || {
            format!("empty window [{}, {}]", self.window.0, self.window.1)
        })?;
        ensure(self.horizon > 0.0 && self.dt > 0.0, || {
            "horizon and time step must be positive".into()
        })?;
        ensure(self.margin() >= 0.0, || "margin must be nonnegative".into())?;
        ensure(bound * self.dt <= 0.1, || {
            format!(
                "rate bound {bound} times dt {} exceeds 0.1; reduce dt",
                self.dt
            )
        })?;
        let width = self.window.1 - self.window.0 + 2.0 * self.margin();
        ensure(width / self.delta <= 5e7, || {
            format!("window of width {width} at spacing {} is too many particles", self.delta)
        })?;
        Ok(bound)
    }
}

/// Particle positions at one time, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleFront {
    pub time: f64,
    pub positions: Vec<f64>,
    /// Id of each particle; merged particles keep the id of the left one.
    pub ids: Vec<u64>,
    /// Bubble id of each gap, `gap_ids[i]` lying between particles `i` and `i + 1`.
    pub gap_ids: Vec<u64>,
}

impl ParticleFront {
    /// The gap strictly containing `x`, as `(lower, upper, bubble id)`.
    pub fn gap_containing(&self, x: f64) -> Option<(f64, f64, u64)> {
        let k = self.positions.partition_point(|&p| p <= x);
        (k > 0 && k < self.positions.len() && self.positions[k - 1] < x)
            .then(|| (self.positions[k - 1], self.positions[k], self.gap_ids[k - 1]))
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.positions.partition_point(|&p| p < lo);
        let b = self.positions.partition_point(|&p| p <= hi);
        b - a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Coalesce,
    Fragment,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Coalesce => "coalesce",
            Self::Fragment => "fragment",
        }
    }
}

/// For a coalescence, `lower`/`upper` are the two particles' positions
/// before merging; for a fragmentation they bound the fragmented gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarbleEvent {
    pub kind: EventKind,
    pub time: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Birth and death of one bubble id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleLife {
    pub sigma: f64,
    pub tau: Option<f64>,
    pub death_kind: Option<DeathKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarbleTrace {
    pub config: MarbleConfig,
    pub grid: TimeGrid,
    pub fronts: Vec<ParticleFront>,
    pub events: Vec<MarbleEvent>,
    pub fragmentation_count: u64,
    /// Indexed by bubble id; empty unless bubbles are tracked.
    pub bubbles: Vec<BubbleLife>,
    pub seed: u64,
    pub stream_id: u64,
}

impl MarbleTrace {
    pub fn final_front(&self) -> &ParticleFront {
        self.fronts.last().expect("a trace always keeps its final front")
    }
}

/// Sub-steps inside a refill block move particles by at most this many
/// mean spacings (in standard deviation).
const SUBSTEP_SPACING: f64 = 0.5;

/// A particle during one step: end position, start of the current sub-step,
/// start of the grid step, id and refill block (0 outside any block).
#[derive(Debug, Clone, Copy)]
struct Moving {
    x: f64,
    old: f64,
    origin: f64,
    id: u64,
    block: u32,
}

/// Particles of a step in start order, `gaps[i]` lying between `ps[i]` and
/// `ps[i + 1]`.
#[derive(Debug, Default)]
struct Line {
    ps: Vec<Moving>,
    gaps: Vec<u64>,
}

impl Line {
    fn clear(&mut self) {
        self.ps.clear();
        self.gaps.clear();
    }
}

/// A coalescence: the killed gap and the two positions that met.
struct Merge {
    gap: u64,
    time: f64,
    lower: f64,
    upper: f64,
}

/// Whether two paths given as `(start, end)`, left one first, met during a
/// step of length `dt`: their order swapped, or their gap, a variance-2
/// Brownian bridge, touched 0.
fn met(left: (f64, f64), right: (f64, f64), dt: f64, rng: &mut RngStream) -> bool {
    let (a, b) = (right.0 - left.0, right.1 - left.1);
    b <= 0.0 || (a > 0.0 && rng.unit() < (-a * b / dt).exp())
}

/// Left-to-right stack sweep merging the particles of `input` that met
/// during a step of length `dt`. Pairs from the same refill block were
/// already resolved by sub-steps and merge only if their order swapped.
fn coalesce(
    input: &Line,
    rule: MergeRule,
    dt: f64,
    time: f64,
    out: &mut Line,
    merges: &mut Vec<Merge>,
    rng: &mut RngStream,
) {
    out.clear();
    for (j, &p) in input.ps.iter().enumerate() {
        if let Some(top) = out.ps.last_mut() {
            let hit = if top.block != 0 && top.block == p.block {
                p.x <= top.x
            } else {
                met((top.old, top.x), (p.old, p.x), dt, rng)
            };
            if hit {
                merges.push(Merge {
                    gap: input.gaps[j - 1],
                    time,
                    lower: top.x.min(p.x),
                    upper: top.x.max(p.x),
                });
                if rule == MergeRule::Midpoint {
                    top.x = 0.5 * (top.x + p.x);
                    top.old = 0.5 * (top.old + p.old);
                    top.origin = 0.5 * (top.origin + p.origin);
                    // a moved midpoint can fall behind the particle below
                    while out.ps.len() >= 2 && out.ps[out.ps.len() - 1].x <= out.ps[out.ps.len() - 2].x {
                        let q = out.ps.pop().expect("two particles");
                        let gap = out.gaps.pop().expect("gap between them");
                        let below = out.ps.last_mut().expect("two particles");
                        merges.push(Merge {
                            gap,
                            time,
                            lower: q.x,
                            upper: below.x,
                        });
                        below.x = 0.5 * (below.x + q.x);
                        below.old = 0.5 * (below.old + q.old);
                        below.origin = 0.5 * (below.origin + q.origin);
                    }
                }
                continue;
            }
            out.gaps.push(input.gaps[j - 1]);
        }
        out.ps.push(p);
    }
}

struct Marble<'a> {
    cfg: &'a MarbleConfig,
    bound: f64,
    pos: Vec<f64>,
    ids: Vec<u64>,
    gap_ids: Vec<u64>,
    /// Particles placed by a refill at the start of the current step.
    fresh: Vec<bool>,
    next_particle: u64,
    next_bubble: u64,
    bubbles: Vec<BubbleLife>,
    events: Vec<MarbleEvent>,
    fragmentations: u64,
    // step scratch
    moved: Line,
    swept: Line,
    block: Line,
    block_tmp: Line,
    merges: Vec<Merge>,
}

impl<'a> Marble<'a> {
    fn new(cfg: &'a MarbleConfig, bound: f64) -> Self {
        let lo = cfg.window.0 - cfg.margin();
        let hi = cfg.window.1 + cfg.margin();
        let n = ((hi - lo) / cfg.delta).round() as usize + 1;
        let pos: Vec<f64> = (0..n).map(|i| lo + i as f64 * cfg.delta).collect();
        let mut m = Self {
            cfg,
            bound,
            ids: (0..n as u64).collect(),
            gap_ids: Vec::with_capacity(n),
            fresh: vec![true; n],
            pos,
            next_particle: n as u64,
            next_bubble: 0,
            bubbles: Vec::new(),
            events: Vec::new(),
            fragmentations: 0,
            moved: Line::default(),
            swept: Line::default(),
            block: Line::default(),
            block_tmp: Line::default(),
            merges: Vec::new(),
        };
        for _ in 1..n {
            let id = m.new_bubble(0.0);
            m.gap_ids.push(id);
        }
        m
    }

    fn new_bubble(&mut self, sigma: f64) -> u64 {
        let id = self.next_bubble;
        self.next_bubble += 1;
        if self.cfg.track_bubbles {
            self.bubbles.push(BubbleLife {
                sigma,
                tau: None,
                death_kind: None,
            });
        }
        id
    }

    fn kill_bubble(&mut self, id: u64, tau: f64, kind: DeathKind) {
        if let Some(b) = self.bubbles.get_mut(id as usize) {
            b.tau = Some(tau);
            b.death_kind = Some(kind);
        }
    }

    /// Fragments gaps at the start of a step and marks the refilled
    /// particles in `fresh`; particles already marked stay marked.
    fn fragment(&mut self, t: f64, rng: &mut RngStream) {
        if self.bound <= 0.0 || self.pos.len() < 2 {
            return;
        }
        let candidate = -(-self.bound * self.cfg.dt).exp_m1() / self.bound;
        let fires: Vec<usize> = (0..self.pos.len() - 1)
            .filter(|&i| rng.unit() < candidate * self.cfg.rate.eval(self.pos[i + 1] - self.pos[i]))
            .collect();
        if fires.is_empty() {
            return;
        }
        let mut pos = Vec::with_capacity(self.pos.len());
        let mut ids = Vec::with_capacity(self.pos.len());
        let mut gaps = Vec::with_capacity(self.gap_ids.len());
        let mut fresh = Vec::with_capacity(self.pos.len());
        let mut next_fire = fires.iter().copied().peekable();
        for i in 0..self.pos.len() {
            pos.push(self.pos[i]);
            ids.push(self.ids[i]);
            fresh.push(self.fresh[i]);
            if i + 1 == self.pos.len() {
                break;
            }
            if next_fire.peek() == Some(&i) {
                next_fire.next();
                let (l, u) = (self.pos[i], self.pos[i + 1]);
                self.fragmentations += 1;
                self.kill_bubble(self.gap_ids[i], t, DeathKind::Fragmented);
                if self.cfg.log_events {
                    self.events.push(MarbleEvent {
                        kind: EventKind::Fragment,
                        time: t,
                        lower: l,
                        upper: u,
                    });
                }
                let pieces = ((u - l) / self.cfg.delta).ceil().max(1.0) as usize;
                let step = (u - l) / pieces as f64;
                for j in 1..pieces {
                    gaps.push(self.new_bubble(t));
                    pos.push(l + j as f64 * step);
                    ids.push(self.next_particle);
                    fresh.push(true);
                    self.next_particle += 1;
                }
                gaps.push(self.new_bubble(t));
            } else {
                gaps.push(self.gap_ids[i]);
            }
        }
        self.pos = pos;
        self.ids = ids;
        self.gap_ids = gaps;
        self.fresh = fresh;
    }

    /// Advances particles `a..=b` (a refill and its two boundary particles)
    /// through one step in sub-steps whose standard deviation is at most
    /// `SUBSTEP_SPACING` mean spacings of the block, and at least `δ`,
    /// appending the survivors to `moved` under block tag `tag`.
    fn advance_block(&mut self, a: usize, b: usize, t: f64, tag: u32, rng: &mut RngStream) {
        let dt = self.cfg.dt;
        let floor = self.cfg.delta * self.cfg.delta;
        self.block.clear();
        for i in a..=b {
            let x = self.pos[i];
            self.block.ps.push(Moving {
                x,
                old: x,
                origin: x,
                id: self.ids[i],
                block: 0,
            });
        }
        self.block.gaps.extend_from_slice(&self.gap_ids[a..b]);
        let mut elapsed = 0.0;
        while elapsed < dt {
            let ps = &self.block.ps;
            let spacing = match ps.len() {
                0 | 1 => f64::INFINITY,
                m => (ps[m - 1].x - ps[0].x) / (m - 1) as f64,
            };
            let mut h = (SUBSTEP_SPACING * spacing).powi(2).max(floor);
            if elapsed + h >= dt * (1.0 - 1e-9) {
                h = dt - elapsed;
            }
            let s = h.sqrt();
            for p in &mut self.block.ps {
                p.old = p.x;
                p.x += s * rng.normal();
            }
            elapsed += h;
            coalesce(&self.block, self.cfg.merge_rule, h, t + elapsed, &mut self.block_tmp, &mut self.merges, rng);
            std::mem::swap(&mut self.block, &mut self.block_tmp);
        }
        for p in &self.block.ps {
            self.moved.ps.push(Moving {
                old: p.origin,
                block: tag,
                ..*p
            });
        }
        self.moved.gaps.extend_from_slice(&self.block.gaps);
    }

    fn step(&mut self, t: f64, rng: &mut RngStream) {
        let dt = self.cfg.dt;
        self.fragment(t, rng);
        let t_end = t + dt;
        let s = dt.sqrt();
        let n = self.pos.len();
        self.moved.clear();
        self.merges.clear();
        let mut tag = 0;
        let mut i = 0;
        while i < n {
            if self.fresh[i] || (i + 1 < n && self.fresh[i + 1]) {
                let mut end = i;
                while end + 1 < n && (self.fresh[end] || self.fresh[end + 1]) {
                    end += 1;
                }
                tag += 1;
                self.advance_block(i, end, t, tag, rng);
                i = end;
            } else {
                let x = self.pos[i];
                self.moved.ps.push(Moving {
                    x: x + s * rng.normal(),
                    old: x,
                    origin: x,
                    id: self.ids[i],
                    block: 0,
                });
            }
            if i + 1 < n {
                self.moved.gaps.push(self.gap_ids[i]);
            }
            i += 1;
        }
        coalesce(&self.moved, self.cfg.merge_rule, dt, t_end, &mut self.swept, &mut self.merges, rng);

        let merges = std::mem::take(&mut self.merges);
        for m in &merges {
            if self.cfg.log_events {
                self.events.push(MarbleEvent {
                    kind: EventKind::Coalesce,
                    time: m.time,
                    lower: m.lower,
                    upper: m.upper,
                });
            }
            self.kill_bubble(m.gap, m.time, DeathKind::Coalesced);
        }
        self.merges = merges;
        self.pos.clear();
        self.pos.extend(self.swept.ps.iter().map(|p| p.x));
        self.ids.clear();
        self.ids.extend(self.swept.ps.iter().map(|p| p.id));
        self.gap_ids.clear();
        self.gap_ids.extend_from_slice(&self.swept.gaps);
        self.fresh.clear();
        self.fresh.resize(self.pos.len(), false);
    }

    fn front(&self, time: f64) -> ParticleFront {
        ParticleFront {
            time,
            positions: self.pos.clone(),
            ids: self.ids.clone(),
            gap_ids: self.gap_ids.clone(),
        }
    }
}

pub fn simulate_marble(cfg: &MarbleConfig, rng: &mut RngStream) -> Result<MarbleTrace> {
    let bound = cfg.validate()?;
    let grid = TimeGrid::with_step(0.0, cfg.horizon, cfg.dt)?;
    let mut cfg = cfg.clone();
    cfg.dt = grid.dt;
    let mut m = Marble::new(&cfg, bound);
    let mut fronts = Vec::new();
    if cfg.record_every > 0 {
        fronts.push(m.front(0.0));
    }
    for k in 0..grid.n_steps {
        m.step(grid.time(k), rng);
        let done = k + 1 == grid.n_steps;
        if done || (cfg.record_every > 0 && (k + 1) % cfg.record_every == 0) {
            fronts.push(m.front(grid.time(k + 1)));
        }
    }
    Ok(MarbleTrace {
        grid,
        fronts,
        events: std::mem::take(&mut m.events),
        fragmentation_count: m.fragmentations,
        bubbles: std::mem::take(&mut m.bubbles),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        config: cfg,
    })
}
