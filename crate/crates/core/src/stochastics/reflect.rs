use super::RngStream;
use crate::error::{ensure, Result};

/// Skorokhod map at 0: `D[k] = W[k] + max(0, max_{j≤k} -W[j])`.
pub fn skorokhod_reflect(driver: &[f64]) -> Result<Vec<f64>> {
    ensure(!driver.is_empty(), || "Skorokhod map needs a nonempty driver".into())?;
    let mut r = Reflector::default();
    Ok(driver.iter().map(|&w| r.push(w)).collect())
}

/// Streaming form of [`skorokhod_reflect`]: feed driver values one at a time.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reflector {
    regulator: f64,
}

impl Reflector {
    #[inline]
    pub fn push(&mut self, w: f64) -> f64 {
        if -w > self.regulator {
            self.regulator = -w;
        }
        w + self.regulator
    }

    /// Accumulated push (the local-time term) so far.
    pub fn regulator(&self) -> f64 {
        self.regulator
    }
}

/// One step of a Brownian motion reflected at 0, exact at the step ends.
///
/// `gap` is the current nonnegative value, `increment` the free driver
/// increment over the step and `variance` its variance. The running minimum
/// of the driver over the step is drawn from the Brownian-bridge law given
/// the increment, so reflections between grid points are not missed.
#[inline]
pub fn reflected_step(gap: f64, increment: f64, variance: f64, rng: &mut RngStream) -> f64 {
    let free = gap + increment;
    // The bridge minimum only matters when it can reach -gap; skip the draw
    // when the endpoint is far above 0 relative to the step scale.
    if free > 0.0 && gap > 0.0 && gap * free > 40.0 * variance {
        return free;
    }
    let u = rng.open_unit();
    let min = 0.5 * (increment - (increment * increment - 2.0 * variance * u.ln()).sqrt());
    free.max(increment - min)
}
