//! Brownian increments and Poisson random measures with reproducible
//! per-particle substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(master_seed, purpose)` and selected by `stream_id` (usually the
//! particle index). Brownian draws for step `k` occupy a fixed word range
//! of that stream, so any step can be regenerated without replaying the
//! ones before it, and results never depend on the thread schedule.

mod jumps;
mod panel;
mod stream;

pub use jumps::{sample_jump_events, verify_isometry, IsometryReport, JumpEvent, JumpLaw, MarkLaw};
pub use panel::NoisePanel;
pub use stream::{fill_normals, sample_brownian, stream_rng, BrownianStream, Purpose};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Anything that hands out sample points (audits, samplers for checks).
pub trait PointSource {
    fn sample(&mut self) -> Vec<f64>;
}

/// i.i.d. `N(0, scale² I)` points in R^dim.
pub struct GaussianSource {
    dim: usize,
    scale: f64,
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn new(dim: usize, scale: f64, seed: u64) -> Self {
        GaussianSource { dim, scale, rng: stream_rng(seed, Purpose::Audit, 0) }
    }
}

impl PointSource for GaussianSource {
    fn sample(&mut self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        stream::fill_normals(&mut self.rng, &mut v);
        v.iter_mut().for_each(|x| *x *= self.scale);
        v
    }
}

/// Uniform draw on `(0, 1]`, safe to pass to `ln`.
#[inline]
pub(crate) fn open_unit(rng: &mut impl Rng) -> f64 {
    1.0 - rng.random::<f64>()
}
