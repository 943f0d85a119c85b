use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::open_unit;

/// What a stream is used for; distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Brownian,
    Jumps,
    Initial,
    Compensator,
    GeneratorMarks,
    Audit,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Brownian => 0x9e37_79b9_7f4a_7c15,
            Purpose::Jumps => 0xbf58_476d_1ce4_e5b9,
            Purpose::Initial => 0x94d0_49bb_1331_11eb,
            Purpose::Compensator => 0xd6e8_feb8_6659_fd93,
            Purpose::GeneratorMarks => 0xa076_1d64_78bd_642f,
            Purpose::Audit => 0xe703_7ed1_a0b4_28db,
        }
    }
}

/// ChaCha8 stream for `(master_seed, purpose, stream_id)`.
pub fn stream_rng(master_seed: u64, purpose: Purpose, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ purpose.tag());
    rng.set_stream(stream_id);
    rng
}

/// Box–Muller; consumes exactly two `f64` draws per pair of outputs.
pub fn fill_normals(rng: &mut impl Rng, out: &mut [f64]) {
    let mut chunks = out.chunks_mut(2);
    for pair in &mut chunks {
        let r = (-2.0 * open_unit(rng).ln()).sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        pair[0] = r * theta.cos();
        if pair.len() > 1 {
            pair[1] = r * theta.sin();
        }
    }
}

/// `m` independent `N(0, h)` draws.
pub fn sample_brownian(dim: usize, h: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!(h >= 0.0, "step must be nonnegative");
    let mut v = vec![0.0; dim];
    fill_normals(rng, &mut v);
    let s = h.sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Brownian increments for one particle, addressable by step index.
#[derive(Clone, Debug)]
pub struct BrownianStream {
    rng: ChaCha8Rng,
    dim: usize,
    next_step: u64,
}

impl BrownianStream {
    pub fn new(master_seed: u64, stream_id: u64, dim: usize) -> Self {
        BrownianStream { rng: stream_rng(master_seed, Purpose::Brownian, stream_id), dim, next_step: 0 }
    }

    /// 32-bit ChaCha words consumed per step: two `u64` per normal pair.
    fn words_per_step(&self) -> u128 {
        4 * self.dim.div_ceil(2) as u128
    }

    /// Increment over step `k` with variance `h` per coordinate.
    pub fn increment(&mut self, step: u64, h: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * self.words_per_step());
        }
        fill_normals(&mut self.rng, out);
        let s = h.sqrt();
        out.iter_mut().for_each(|x| *x *= s);
        self.next_step = step + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_gives_zero_vector() {
        let mut rng = stream_rng(1, Purpose::Brownian, 0);
        assert_eq!(sample_brownian(3, 0.0, &mut rng), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn same_stream_state_same_output() {
        let a = sample_brownian(2, 0.25, &mut stream_rng(5, Purpose::Brownian, 3));
        let b = sample_brownian(2, 0.25, &mut stream_rng(5, Purpose::Brownian, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn unit_variance_moments() {
        let mut rng = stream_rng(11, Purpose::Brownian, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_brownian(1, 1.0, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn random_access_matches_sequential() {
        for dim in [1, 2, 3] {
            let mut seq = BrownianStream::new(42, 7, dim);
            let mut outs = Vec::new();
            for k in 0..6 {
                let mut o = vec![0.0; dim];
                seq.increment(k, 0.01, &mut o);
                outs.push(o);
            }
            let mut jump = BrownianStream::new(42, 7, dim);
            for k in [4u64, 1, 5, 0] {
                let mut o = vec![0.0; dim];
                jump.increment(k, 0.01, &mut o);
                assert_eq!(o, outs[k as usize], "dim {dim} step {k}");
            }
        }
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let n = 100_000;
        let mut a = BrownianStream::new(3, 0, 1);
        let mut b = BrownianStream::new(3, 1, 1);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        let (mut x, mut y) = ([0.0], [0.0]);
        for k in 0..n {
            a.increment(k, 1.0, &mut x);
            b.increment(k, 1.0, &mut y);
            sab += x[0] * y[0];
            saa += x[0] * x[0];
            sbb += y[0] * y[0];
        }
        let rho = sab / (saa * sbb).sqrt();
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho {rho}");
    }
}
