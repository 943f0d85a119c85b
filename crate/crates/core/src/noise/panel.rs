use std::io::Write;

use rayon::prelude::*;

use super::jumps::{sample_jump_events, JumpEvent, JumpLaw};
use super::stream::{stream_rng, BrownianStream, Purpose};

/// Noise for an `N`-particle system: one Brownian stream and one
/// pre-sampled list of jump events per particle.
///
/// Jump events are generated for the whole horizon up front, so their exact
/// times are available when a step is applied.
#[derive(Clone, Debug)]
pub struct NoisePanel {
    master_seed: u64,
    noise_dim: usize,
    step: f64,
    brownian: Vec<BrownianStream>,
    jumps: Vec<Vec<JumpEvent>>,
}

impl NoisePanel {
    pub fn new(
        master_seed: u64,
        particles: usize,
        noise_dim: usize,
        step: f64,
        n_steps: usize,
        law: Option<&JumpLaw>,
    ) -> Self {
        let horizon = n_steps as f64 * step;
        let brownian = (0..particles as u64)
            .map(|i| BrownianStream::new(master_seed, i, noise_dim))
            .collect();
        let jumps = (0..particles as u64)
            .into_par_iter()
            .map(|i| match law {
                Some(l) => sample_jump_events(l, horizon, &mut stream_rng(master_seed, Purpose::Jumps, i)),
                None => Vec::new(),
            })
            .collect();
        NoisePanel { master_seed, noise_dim, step, brownian, jumps }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn particles(&self) -> usize {
        self.brownian.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Writes `ΔB^i` for step `k` into `out` (`N × m`, particle-major).
    pub fn fill_increments(&mut self, k: usize, out: &mut [f64]) {
        let (m, h) = (self.noise_dim, self.step);
        if m == 0 {
            return;
        }
        out.par_chunks_mut(m)
            .zip(self.brownian.par_iter_mut())
            .for_each(|(o, s)| s.increment(k as u64, h, o));
    }

    /// Events of particle `i` with time in `(k h, (k+1) h]`.
    pub fn jumps_in(&self, i: usize, k: usize) -> &[JumpEvent] {
        let ev = &self.jumps[i];
        let t0 = k as f64 * self.step;
        let t1 = (k + 1) as f64 * self.step;
        let lo = ev.partition_point(|e| e.time <= t0);
        let hi = ev.partition_point(|e| e.time <= t1);
        &ev[lo..hi]
    }

    pub fn events(&self, i: usize) -> &[JumpEvent] {
        &self.jumps[i]
    }

    /// Debug dump: one row per event, `particle,time,mark_0,…`.
    pub fn write_jump_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let k = self.jumps.iter().flatten().map(|e| e.mark.len()).max().unwrap_or(0);
        write!(w, "particle,time")?;
        for j in 0..k {
            write!(w, ",mark_{j}")?;
        }
        writeln!(w)?;
        for (i, ev) in self.jumps.iter().enumerate() {
            for e in ev {
                write!(w, "{i},{}", e.time)?;
                for u in &e.mark {
                    write!(w, ",{u}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
