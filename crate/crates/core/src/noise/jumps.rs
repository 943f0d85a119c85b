use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stream::{fill_normals, stream_rng, Purpose};
use super::open_unit;
use crate::quadrature::composite_gauss;
use crate::stats::MeanSe;
use crate::vecops::norm_sq;

/// Normalized law of the marks on `U₀ = {‖u‖ ≤ α}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkLaw {
    /// Uniform on the ball of radius α.
    UniformBall,
    /// `N(0, scale² I)` conditioned on `‖u‖ ≤ α`.
    TruncatedGaussian { scale: f64 },
}

/// `v = total_rate × (mark law on U₀)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpLaw {
    pub total_rate: f64,
    pub alpha: f64,
    pub mark_dim: usize,
    pub mark_law: MarkLaw,
    /// `∫_{U₀} ‖u‖² v(du)`.
    pub second_mark_moment: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: Vec<f64>,
}

impl JumpLaw {
    pub fn new(total_rate: f64, alpha: f64, mark_dim: usize, mark_law: MarkLaw) -> Result<Self, String> {
        if !(total_rate.is_finite() && total_rate >= 0.0) {
            return Err(format!("jump rate must be finite and nonnegative, got {total_rate}"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(format!("mark radius alpha must be positive, got {alpha}"));
        }
        if mark_dim == 0 {
            return Err("mark dimension must be at least 1".into());
        }
        if let MarkLaw::TruncatedGaussian { scale } = mark_law {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(format!("truncated gaussian scale must be positive, got {scale}"));
            }
        }
        let mut law = JumpLaw { total_rate, alpha, mark_dim, mark_law, second_mark_moment: 0.0 };
        law.second_mark_moment = total_rate * law.mark_second_moment();
        Ok(law)
    }

    /// `E‖u‖²` under the normalized mark law.
    pub fn mark_second_moment(&self) -> f64 {
        let k = self.mark_dim as f64;
        match self.mark_law {
            MarkLaw::UniformBall => k / (k + 2.0) * self.alpha * self.alpha,
            MarkLaw::TruncatedGaussian { scale } => {
                // Radial density ∝ r^{k−1} exp(−r²/2s²) on [0, α].
                let dens = |r: f64, p: i32| r.powi(p) * (-0.5 * r * r / (scale * scale)).exp();
                let kk = self.mark_dim as i32;
                let num = composite_gauss(|r| dens(r, kk + 1), 0.0, self.alpha, 64, 8);
                let den = composite_gauss(|r| dens(r, kk - 1), 0.0, self.alpha, 64, 8);
                num / den
            }
        }
    }

    /// `E[u]`; both mark laws are centrally symmetric.
    pub fn mean_mark(&self) -> Vec<f64> {
        vec![0.0; self.mark_dim]
    }

    pub fn sample_mark(&self, rng: &mut impl Rng) -> Vec<f64> {
        let k = self.mark_dim;
        match self.mark_law {
            MarkLaw::UniformBall => {
                if k == 1 {
                    return vec![self.alpha * (2.0 * rng.random::<f64>() - 1.0)];
                }
                let mut dir = vec![0.0; k];
                loop {
                    fill_normals(rng, &mut dir);
                    let n = norm_sq(&dir).sqrt();
                    if n > 0.0 {
                        let r = self.alpha * rng.random::<f64>().powf(1.0 / k as f64);
                        dir.iter_mut().for_each(|x| *x *= r / n);
                        return dir;
                    }
                }
            }
            MarkLaw::TruncatedGaussian { scale } => {
                let mut u = vec![0.0; k];
                loop {
                    fill_normals(rng, &mut u);
                    u.iter_mut().for_each(|x| *x *= scale);
                    if norm_sq(&u) <= self.alpha * self.alpha {
                        return u;
                    }
                }
            }
        }
    }

    /// `∫ g(u) (mark law)(du)`: Gauss quadrature against the exact density
    /// for one-dimensional marks, a fixed-seed Monte Carlo average otherwise.
    pub fn mark_expectation(&self, g: &dyn Fn(&[f64]) -> f64) -> f64 {
        let a = self.alpha;
        if self.mark_dim == 1 {
            return match self.mark_law {
                MarkLaw::UniformBall => {
                    composite_gauss(|u| g(&[u]), -a, a, 64, 8) / (2.0 * a)
                }
                MarkLaw::TruncatedGaussian { scale } => {
                    let w = |u: f64| (-0.5 * u * u / (scale * scale)).exp();
                    let num = composite_gauss(|u| g(&[u]) * w(u), -a, a, 64, 8);
                    let den = composite_gauss(w, -a, a, 64, 8);
                    num / den
                }
            };
        }
        let mut rng = stream_rng(0x5eed, Purpose::Audit, 1);
        let n = 200_000;
        (0..n).map(|_| g(&self.sample_mark(&mut rng))).sum::<f64>() / n as f64
    }
}

/// Homogeneous Poisson event times on `(0, horizon]` with i.i.d. marks.
pub fn sample_jump_events(law: &JumpLaw, horizon: f64, rng: &mut impl Rng) -> Vec<JumpEvent> {
    let mut events = Vec::new();
    if law.total_rate <= 0.0 || horizon <= 0.0 {
        return events;
    }
    let mut t = 0.0;
    loop {
        t += -open_unit(rng).ln() / law.total_rate;
        if t > horizon {
            return events;
        }
        events.push(JumpEvent { time: t, mark: law.sample_mark(rng) });
    }
}

/// Both sides of `E∫∫|φ|² N(ds,du) = E∫∫|φ|² v(du)ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    /// Monte Carlo estimate of the counting-measure side.
    pub lhs: MeanSe,
    /// Quadrature of the intensity side.
    pub rhs: f64,
    pub z: f64,
}

pub fn verify_isometry(
    law: &JumpLaw,
    phi: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    horizon: f64,
    trials: usize,
    seed: u64,
) -> IsometryReport {
    let sums: Vec<f64> = (0..trials as u64)
        .map(|id| {
            let mut rng = stream_rng(seed, Purpose::Jumps, id);
            sample_jump_events(law, horizon, &mut rng)
                .iter()
                .map(|e| norm_sq(&phi(e.time, &e.mark)))
                .sum()
        })
        .collect();
    let lhs = MeanSe::from_slice(&sums);
    let rhs = if law.total_rate == 0.0 || horizon == 0.0 {
        0.0
    } else {
        law.total_rate
            * composite_gauss(|s| law.mark_expectation(&|u| norm_sq(&phi(s, u))), 0.0, horizon, 4, 8)
    };
    let z = lhs.z_score(rhs);
    IsometryReport { lhs, rhs, z }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(rate: f64, alpha: f64) -> JumpLaw {
        JumpLaw::new(rate, alpha, 1, MarkLaw::UniformBall).unwrap()
    }

    #[test]
    fn zero_rate_gives_no_events() {
        let mut rng = stream_rng(1, Purpose::Jumps, 0);
        assert!(sample_jump_events(&uniform(0.0, 1.0), 5.0, &mut rng).is_empty());
    }

    #[test]
    fn event_counts_follow_poisson_mean() {
        let law = uniform(2.0, 1.0);
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|id| sample_jump_events(&law, 10.0, &mut stream_rng(9, Purpose::Jumps, id)).len() as f64)
            .collect();
        let m = MeanSe::from_slice(&counts);
        // Mean of n i.i.d. Poisson(20) counts: 3σ band with σ = √20/√n.
        assert!((m.mean - 20.0).abs() < 3.0 * 20f64.sqrt() / (n as f64).sqrt(), "{m:?}");
    }

    #[test]
    fn times_increasing_and_marks_bounded() {
        for law in [
            JumpLaw::new(50.0, 0.5, 1, MarkLaw::UniformBall).unwrap(),
            JumpLaw::new(50.0, 0.5, 3, MarkLaw::UniformBall).unwrap(),
            JumpLaw::new(50.0, 0.5, 2, MarkLaw::TruncatedGaussian { scale: 0.4 }).unwrap(),
        ] {
            let ev = sample_jump_events(&law, 4.0, &mut stream_rng(2, Purpose::Jumps, 0));
            assert!(ev.len() > 100);
            assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
            assert!(ev.iter().all(|e| e.time > 0.0 && e.time <= 4.0));
            assert!(ev.iter().all(|e| norm_sq(&e.mark).sqrt() <= 0.5));
        }
    }

    #[test]
    fn second_moments() {
        assert!((uniform(1.0, 1.0).second_mark_moment - 1.0 / 3.0).abs() < 1e-15);
        let l3 = JumpLaw::new(2.0, 1.0, 3, MarkLaw::UniformBall).unwrap();
        assert!((l3.second_mark_moment - 2.0 * 0.6).abs() < 1e-15);
        // Truncation far in the tail leaves the Gaussian second moment k·s².
        let g = JumpLaw::new(1.0, 10.0, 2, MarkLaw::TruncatedGaussian { scale: 0.5 }).unwrap();
        assert!((g.second_mark_moment - 0.5).abs() < 1e-9);
    }

    #[test]
    fn isometry_zero_phi() {
        let r = verify_isometry(&uniform(1.0, 1.0), &|_, _| vec![0.0], 1.0, 100, 1);
        assert_eq!((r.lhs.mean, r.rhs, r.z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn isometry_time_weighted() {
        let r = verify_isometry(&uniform(1.0, 1.0), &|s, u| vec![s * u[0].abs()], 1.0, 10_000, 4);
        assert!((r.rhs - 1.0 / 9.0).abs() < 1e-12);
        assert!(r.z.abs() < 3.0, "{r:?}");
    }

    #[test]
    fn compensated_sum_is_centered() {
        // Σ u_i − ∫∫ u v(du) ds with E u = 0.
        let law = uniform(3.0, 1.0);
        let n = 10_000;
        let sums: Vec<f64> = (0..n)
            .map(|id| {
                sample_jump_events(&law, 1.0, &mut stream_rng(17, Purpose::Jumps, id))
                    .iter()
                    .map(|e| e.mark[0])
                    .sum::<f64>()
                    - law.total_rate * law.mean_mark()[0]
            })
            .collect();
        let m = MeanSe::from_slice(&sums);
        assert!(m.mean.abs() < 4.0 * m.se, "{m:?}");
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(JumpLaw::new(-1.0, 1.0, 1, MarkLaw::UniformBall).is_err());
        assert!(JumpLaw::new(1.0, 0.0, 1, MarkLaw::UniformBall).is_err());
        assert!(JumpLaw::new(1.0, 1.0, 1, MarkLaw::TruncatedGaussian { scale: 0.0 }).is_err());
    }
}
