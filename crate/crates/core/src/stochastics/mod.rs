//! Seedable random primitives and special functions shared by every simulator.

mod bessel3;
mod reflect;
mod special;

pub use bessel3::{bessel3_cdf, bessel3_density, bessel3_quantile, bessel3_sf};
pub use reflect::{reflected_step, skorokhod_reflect, Reflector};
pub use special::{
    beta_cdf, erf, gamma_cdf, ln_gamma, reg_inc_beta, reg_inc_gamma, reg_inc_gamma_upper,
};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{ensure, Result};

/// Module tags mixed into the root seed so that different experiments fed
/// the same root seed draw from unrelated streams.
pub mod tags {
    pub const RBESSEL: u64 = 0x5242_4553_5345_4c00;
    pub const LADDER: u64 = 0x4c41_4444_4552_0000;
    pub const VEIN: u64 = 0x5645_494e_0000_0000;
    pub const MARBLE: u64 = 0x4d41_5242_4c45_0000;
    pub const POPULATION: u64 = 0x504f_5055_4c00_0000;
    pub const SPINE: u64 = 0x5350_494e_4500_0000;
    pub const RENDER: u64 = 0x5245_4e44_4552_0000;
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 2^64 independent streams make the stream id a
/// true split rather than a reseed: the same pair yields the same draws on
/// every run and every thread.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    /// Stream for replica `replica` of the experiment tagged `tag` under
    /// `root_seed`. The key is `splitmix64(root_seed ^ tag)`, the ChaCha
    /// stream is the replica index.
    pub fn derive(root_seed: u64, tag: u64, replica: u64) -> Self {
        Self::new(splitmix64(root_seed ^ tag), replica)
    }

    /// Like [`RngStream::derive`] with an extra key, for experiments that
    /// run several independent families of replicas (e.g. one per level).
    pub fn derive_keyed(root_seed: u64, tag: u64, key: u64, replica: u64) -> Self {
        Self::new(splitmix64(splitmix64(root_seed ^ tag) ^ key), replica)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in the open-at-zero interval (0, 1].
    #[inline]
    pub fn open_unit(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Exponential waiting time with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.open_unit().ln() / rate
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform time discretisation of `[t0, t0 + n_steps·dt]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        ensure(t1 > t0 && t0.is_finite() && t1.is_finite(), || {
            format!("time grid needs t0 < t1, got [{t0}, {t1}]")
        })?;
        ensure(n_steps >= 1, || "time grid needs at least one step".into())?;
        Ok(Self {
            t0,
            dt: (t1 - t0) / n_steps as f64,
            n_steps,
        })
    }

    /// Grid on `[t0, t1]` whose step is at most `dt`.
    pub fn with_step(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        ensure(dt > 0.0, || format!("time step must be positive, got {dt}"))?;
        let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, t1, n)
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.n_steps as f64 * self.dt
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t1()
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.time(k))
    }

    /// Index of the grid point nearest to `t`, if `t` lies in the grid range.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.dt;
        if t < self.t0 - tol || t > self.t1() + tol {
            return None;
        }
        Some((((t - self.t0) / self.dt).round() as usize).min(self.n_steps))
    }
}

/// Normal(0, diffusivity·dt) increment.
pub fn gaussian_increment(rng: &mut RngStream, dt: f64, diffusivity: f64) -> Result<f64> {
    ensure(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    ensure(diffusivity > 0.0, || {
        format!("diffusivity must be positive, got {diffusivity}")
    })?;
    Ok((diffusivity * dt).sqrt() * rng.normal())
}

/// Poisson draw: sequential inversion below mean 10, rejection above.
pub fn sample_poisson(mean: f64, rng: &mut RngStream) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 10.0 {
        let u = rng.unit();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p < 1e-300 && cdf >= 1.0 - 1e-15 {
                break;
            }
        }
        k
    } else {
        Poisson::new(mean)
            .expect("positive finite Poisson mean")
            .sample(rng) as u64
    }
}

/// Gamma(shape, scale 1) draw.
pub fn sample_gamma(shape: f64, rng: &mut RngStream) -> f64 {
    Gamma::new(shape, 1.0)
        .expect("positive Gamma shape")
        .sample(rng)
}

/// Exact transition of the squared Bessel process of dimension `dim` over
/// time `dt` from `x0`: `Y = 2·dt·G`, `G ~ Gamma(dim/2 + K)`,
/// `K ~ Poisson(x0 / (2·dt))`. The Bessel position is `√Y`.
pub fn squared_bessel_transition(x0: f64, dim: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    ensure(x0 >= 0.0 && x0.is_finite(), || {
        format!("squared Bessel start must be a finite nonnegative number, got {x0}")
    })?;
    ensure(dim > 0.0, || format!("Bessel dimension must be positive, got {dim}"))?;
    ensure(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let k = sample_poisson(x0 / (2.0 * dt), rng);
    Ok(2.0 * dt * sample_gamma(0.5 * dim + k as f64, rng))
}

/// Exact Bessel-3 step from `x ≥ 0` over `dt`: the norm of a 3-d Brownian
/// motion started at distance `x` from the origin.
#[inline]
pub fn bessel3_step(x: f64, dt: f64, rng: &mut RngStream) -> f64 {
    let s = dt.sqrt();
    bessel3_from_normals(x, s, rng.normal(), rng.normal(), rng.normal())
}

/// Bessel-3 step with caller-supplied standard normals; used by couplings
/// that share driving noise.
#[inline]
pub fn bessel3_from_normals(x: f64, sqrt_dt: f64, z1: f64, z2: f64, z3: f64) -> f64 {
    let a = x + sqrt_dt * z1;
    let b = sqrt_dt * z2;
    let c = sqrt_dt * z3;
    (a * a + b * b + c * c).sqrt()
}
