//! Monte Carlo simulation of coalescing and fragmenting Brownian systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`stochastics`]: seedable random streams, exact Bessel transitions,
//!   Skorokhod reflection and the special functions used as CDF targets.
//! * [`analysis`]: the λ-parameter algebra and the statistics engine
//!   (Kolmogorov–Smirnov distances, tail-exponent fits, subordinator collapse).
//! * [`rbessel`]: the R-Bessel jump-diffusion, its truncations and excursions.
//! * [`vein`]: the (L, C, U) vein triple and the bubble containing a point.
//! * [`marble`]: finite-resolution R-marble fronts and bubble extraction.
//! * [`branching`]: the growth-fragmentation population and its spine.
//! * [`render`]: deterministic PPM / SVG rasterisation of marble traces.
//!
//! Replicas are scheduled through [`exec::Executor`]; with the default
//! `parallel` feature they run on the rayon pool, otherwise sequentially.
//! Every replica owns an [`stochastics::RngStream`] derived from
//! `(root seed, module tag, replica index)`, so results do not depend on the
//! number of worker threads.

pub mod analysis;
pub mod branching;
pub mod error;
pub mod exec;
pub mod marble;
pub mod rbessel;
pub mod render;
pub mod report;
pub mod stochastics;
pub mod vein;

pub use error::{Error, Result};
