//! Growth-fragmentation: particle masses diffuse with diffusivity `D`
//! (default 2, i.e. `√2·BM`), are killed at 0 and split into `N` equal
//! pieces at rate `R(mass)`. The spine is the `h(x) = x` transform of one
//! particle: a `√D`-scaled Bessel-3 process jumping from `x` to `x/N` at rate
//! `R(x)`.

use serde::{Deserialize, Serialize};

use crate::analysis::{mean_stderr, median};
use crate::error::{ensure, Result};
use crate::exec::Executor;
use crate::rbessel::RateFunction;
use crate::stochastics::{bessel3_step, tags, RngStream, TimeGrid};

pub const DEFAULT_DIFFUSIVITY: f64 = 2.0;
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassParticle {
    pub mass: f64,
    pub id: u64,
    /// `None` for the initial particles.
    pub parent_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub time: f64,
    pub particles: Vec<MassParticle>,
}

impl PopulationState {
    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn is_extinct(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub rate: RateFunction,
    /// Number of pieces per split.
    pub n_split: u32,
    pub diffusivity: f64,
    pub cap: usize,
    /// Keep the full particle list at every grid time, not only the counts.
    pub record_states: bool,
}

impl PopulationConfig {
    pub fn new(rate: RateFunction, n_split: u32) -> Self {
        Self {
            rate,
            n_split,
            diffusivity: DEFAULT_DIFFUSIVITY,
            cap: DEFAULT_CAP,
            record_states: false,
        }
    }

    fn validate(&self) -> Result<f64> {
        ensure(self.n_split >= 2, || format!("a split needs N >= 2 pieces, got {}", self.n_split))?;
        ensure(self.diffusivity > 0.0 && self.diffusivity.is_finite(), || {
            format!("diffusivity must be positive, got {}", self.diffusivity)
        })?;
        ensure(self.cap > 0, || "particle cap must be positive".into())?;
        self.rate.require_bound()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrajectory {
    pub grid: TimeGrid,
    /// Alive count and total mass at each grid time reached.
    pub n_alive: Vec<usize>,
    pub total_mass: Vec<f64>,
    /// Full states at each grid time reached, if recorded.
    pub states: Vec<PopulationState>,
    /// The state at the last grid time reached.
    pub final_state: PopulationState,
    /// Set when the particle count exceeded the cap; the trajectory then
    /// stops at the step where it happened.
    pub capped: bool,
    pub splits: u64,
    pub kills: u64,
    /// Largest `|Σ before − Σ after|` over split events.
    pub max_split_mass_error: f64,
}

pub fn simulate_population(
    cfg: &PopulationConfig,
    initial: &[f64],
    grid: &TimeGrid,
    rng: &mut RngStream,
) -> Result<PopulationTrajectory> {
    let bound = cfg.validate()?;
    ensure(initial.iter().all(|&m| m > 0.0 && m.is_finite()), || {
        "initial masses must be finite and positive".into()
    })?;
    let n = cfg.n_split as usize;
    let inv_n = 1.0 / cfg.n_split as f64;
    let mut next_id = initial.len() as u64;
    let mut particles: Vec<MassParticle> = initial
        .iter()
        .enumerate()
        .map(|(i, &mass)| MassParticle {
            mass,
            id: i as u64,
            parent_id: None,
        })
        .collect();
    let mut tr = PopulationTrajectory {
        grid: *grid,
        n_alive: Vec::with_capacity(grid.len()),
        total_mass: Vec::with_capacity(grid.len()),
        states: Vec::new(),
        final_state: PopulationState {
            time: grid.t0,
            particles: Vec::new(),
        },
        capped: particles.len() > cfg.cap,
        splits: 0,
        kills: 0,
        max_split_mass_error: 0.0,
    };
    let record = |tr: &mut PopulationTrajectory, time: f64, ps: &[MassParticle]| {
        tr.n_alive.push(ps.len());
        tr.total_mass.push(ps.iter().map(|p| p.mass).sum());
        if cfg.record_states {
            tr.states.push(PopulationState {
                time,
                particles: ps.to_vec(),
            });
        }
    };
    record(&mut tr, grid.t0, &particles);

    let dt = grid.dt;
    let candidate = if bound > 0.0 { -(-bound * dt).exp_m1() / bound } else { 0.0 };
    let sd = (cfg.diffusivity * dt).sqrt();
    let bridge = 2.0 / (cfg.diffusivity * dt);
    let mut last_time = grid.t0;
    let mut next = Vec::with_capacity(particles.len());
    for k in 0..grid.n_steps {
        if tr.capped {
            break;
        }
        next.clear();
        for p in &particles {
            let split = candidate > 0.0 && rng.unit() < candidate * cfg.rate.eval(p.mass);
            let (mass, count) = if split {
                let child = p.mass * inv_n;
                tr.max_split_mass_error = tr.max_split_mass_error.max((p.mass - child * n as f64).abs());
                tr.splits += 1;
                (child, n)
            } else {
                (p.mass, 1)
            };
            for j in 0..count {
                let a = mass;
                let b = a + sd * rng.normal();
                // killed if the step ends below 0 or its bridge touched 0
                if b <= 0.0 || rng.unit() < (-bridge * a * b).exp() {
                    tr.kills += 1;
                    continue;
                }
                next.push(if split {
                    MassParticle {
                        mass: b,
                        id: next_id + j as u64,
                        parent_id: Some(p.id),
                    }
                } else {
                    MassParticle { mass: b, ..*p }
                });
            }
            if split {
                next_id += n as u64;
            }
        }
        std::mem::swap(&mut particles, &mut next);
        last_time = grid.time(k + 1);
        tr.capped = particles.len() > cfg.cap;
        record(&mut tr, last_time, &particles);
    }
    tr.final_state = PopulationState {
        time: last_time,
        particles,
    };
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinePath {
    pub grid: TimeGrid,
    pub mass: Vec<f64>,
    /// Times of the `x → x/N` jumps.
    pub jump_times: Vec<f64>,
}

/// Spine state between events; candidates at rate `bound`, exact scaled
/// Bessel-3 moves in between.
struct Spine<'a> {
    rate: &'a RateFunction,
    bound: f64,
    inv_n: f64,
    diffusivity: f64,
    x: f64,
    t: f64,
    next_candidate: f64,
}

impl Spine<'_> {
    fn wait(&self, rng: &mut RngStream) -> f64 {
        if self.bound > 0.0 {
            rng.exponential(self.bound)
        } else {
            f64::INFINITY
        }
    }

    fn advance_to(&mut self, t_end: f64, rng: &mut RngStream, jumps: &mut Vec<f64>) {
        while self.next_candidate <= t_end {
            self.x = bessel3_step(self.x, self.diffusivity * (self.next_candidate - self.t), rng);
            self.t = self.next_candidate;
            if rng.unit() * self.bound < self.rate.eval(self.x) {
                self.x *= self.inv_n;
                jumps.push(self.t);
            }
            self.next_candidate = self.t + self.wait(rng);
        }
        if t_end > self.t {
            self.x = bessel3_step(self.x, self.diffusivity * (t_end - self.t), rng);
            self.t = t_end;
        }
    }
}

pub fn simulate_spine(
    rate: &RateFunction,
    n_split: u32,
    diffusivity: f64,
    x0: f64,
    grid: &TimeGrid,
    rng: &mut RngStream,
) -> Result<SpinePath> {
    ensure(x0 > 0.0 && x0.is_finite(), || format!("spine must start at a positive mass, got {x0}"))?;
    ensure(n_split >= 2, || format!("a split needs N >= 2 pieces, got {n_split}"))?;
    ensure(diffusivity > 0.0 && diffusivity.is_finite(), || {
        format!("diffusivity must be positive, got {diffusivity}")
    })?;
    let bound = rate.require_bound()?;
    let mut s = Spine {
        rate,
        bound,
        inv_n: 1.0 / n_split as f64,
        diffusivity,
        x: x0,
        t: grid.t0,
        next_candidate: f64::INFINITY,
    };
    s.next_candidate = grid.t0 + s.wait(rng);
    let mut mass = Vec::with_capacity(grid.len());
    let mut jump_times = Vec::new();
    mass.push(x0);
    for k in 1..grid.len() {
        s.advance_to(grid.time(k), rng, &mut jump_times);
        mass.push(s.x);
    }
    Ok(SpinePath {
        grid: *grid,
        mass,
        jump_times,
    })
}

/// Test functions `f` with `f/h` bounded, `h(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `x·e^{−x}`.
    XExpNegX,
    /// `x` restricted to `[lo, hi]`.
    Window { lo: f64, hi: f64 },
    /// `x`, whose expectation is the total mass.
    Identity,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::XExpNegX => x * (-x).exp(),
            Self::Window { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    x
                } else {
                    0.0
                }
            }
            Self::Identity => x,
        }
    }

    /// `f(x)/x` for `x > 0`.
    pub fn over_h(self, x: f64) -> f64 {
        match self {
            Self::XExpNegX => (-x).exp(),
            Self::Window { lo, hi } => f64::from(u8::from((lo..=hi).contains(&x))),
            Self::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManyToOneConfig {
    pub rate: RateFunction,
    pub n_split: u32,
    pub y: f64,
    pub t: f64,
    pub dt: f64,
    pub diffusivity: f64,
    pub f: TestFunction,
    pub replicas: usize,
    pub cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManyToOneReport {
    /// Population side `E_y[Σ_u f(X_u(t))]`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// Spine side `y·E_y[f(X̄_t)/X̄_t]`.
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub relative_difference: f64,
    pub pooled_stderr: f64,
    /// Population runs that hit the particle cap (excluded from `lhs`).
    pub capped_runs: usize,
    /// False when more than 1% of population runs hit the cap.
    pub valid: bool,
}

pub fn many_to_one_check(cfg: &ManyToOneConfig, seed: u64, exec: Executor) -> Result<ManyToOneReport> {
    ensure(cfg.y > 0.0 && cfg.y.is_finite(), || format!("start mass must be positive, got {}", cfg.y))?;
    ensure(cfg.t >= 0.0, || format!("horizon must be nonnegative, got {}", cfg.t))?;
    ensure(cfg.replicas >= 2, || "need at least two replicas per side".into())?;
    let pop = PopulationConfig {
        rate: cfg.rate.clone(),
        n_split: cfg.n_split,
        diffusivity: cfg.diffusivity,
        cap: cfg.cap,
        record_states: false,
    };
    pop.validate()?;
    if cfg.t == 0.0 {
        let v = cfg.f.eval(cfg.y);
        return Ok(ManyToOneReport {
            lhs: v,
            lhs_stderr: 0.0,
            rhs: v,
            rhs_stderr: 0.0,
            relative_difference: 0.0,
            pooled_stderr: 0.0,
            capped_runs: 0,
            valid: true,
        });
    }
    let grid = TimeGrid::with_step(0.0, cfg.t, cfg.dt)?;
    let lhs_runs = exec.try_map(cfg.replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::POPULATION, i as u64);
        let tr = simulate_population(&pop, &[cfg.y], &grid, &mut rng)?;
        let sum: f64 = tr.final_state.particles.iter().map(|p| cfg.f.eval(p.mass)).sum();
        Ok::<_, crate::Error>((!tr.capped).then_some(sum))
    })?;
    let capped_runs = lhs_runs.iter().filter(|r| r.is_none()).count();
    let lhs_vals: Vec<f64> = lhs_runs.into_iter().flatten().collect();
    let rhs_vals = exec.try_map(cfg.replicas, |i| {
        let mut rng = RngStream::derive(seed, tags::SPINE, i as u64);
        let path = simulate_spine(&cfg.rate, cfg.n_split, cfg.diffusivity, cfg.y, &grid, &mut rng)?;
        let x = *path.mass.last().expect("grid has a final point");
        Ok::<_, crate::Error>(cfg.y * cfg.f.over_h(x))
    })?;
    let (lhs, lhs_stderr) = if lhs_vals.len() >= 2 { mean_stderr(&lhs_vals) } else { (f64::NAN, f64::NAN) };
    let (rhs, rhs_stderr) = mean_stderr(&rhs_vals);
    Ok(ManyToOneReport {
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        relative_difference: (lhs - rhs).abs() / lhs.abs(),
        pooled_stderr: lhs_stderr.hypot(rhs_stderr),
        capped_runs,
        valid: capped_runs * 100 <= cfg.replicas,
    })
}

/// Median spine mass at `t` along a truncation ladder of `R = (λ/g²) ∧ n`,
/// independent runs per level.
#[allow(clippy::too_many_arguments)]
pub fn spine_ladder_medians(
    lambda: f64,
    levels: &[f64],
    n_split: u32,
    x0: f64,
    t: f64,
    replicas: usize,
    seed: u64,
    exec: Executor,
) -> Result<Vec<f64>> {
    ensure(!levels.is_empty(), || "need at least one truncation level".into())?;
    ensure(replicas > 0, || "need at least one replica".into())?;
    let grid = TimeGrid::new(0.0, t, 1)?;
    levels
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            let rate = RateFunction::truncated(lambda, n);
            rate.validate()?;
            let ends = exec.try_map(replicas, |i| {
                let mut rng = RngStream::derive_keyed(seed, tags::SPINE, li as u64, i as u64);
                simulate_spine(&rate, n_split, DEFAULT_DIFFUSIVITY, x0, &grid, &mut rng).map(|p| p.mass[1])
            })?;
            Ok(median(&ends))
        })
        .collect()
}
