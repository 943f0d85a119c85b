use rayon::prelude::*;

use super::{InitialCondition, SolverConfig, SolverError};
use crate::measure::EmpiricalMeasure;
use crate::monotone::{MonotoneOperator, MEMBERSHIP_TOL};
use crate::noise::{stream_rng, Purpose};
use crate::vecops::norm;

/// `N` particles with their `K` processes at one grid time.
///
/// All arrays are particle-major `N × d`. `increments` holds the running sum
/// of the drift, diffusion and jump contributions, so that
/// `X = ξ − εK + increments` can be checked at any step.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub(crate) measure: EmpiricalMeasure,
    pub(crate) initial: Vec<f64>,
    pub(crate) k_accum: Vec<f64>,
    pub(crate) k_variation: Vec<f64>,
    pub(crate) increments: Vec<f64>,
    pub(crate) last_dk: Vec<f64>,
    pub(crate) sup_sq: Vec<f64>,
    pub(crate) step_index: usize,
    pub(crate) time: f64,
}

impl ParticleEnsemble {
    /// Ensemble at `t = 0` with `K₀ = 0`.
    pub fn new(dim: usize, states: Vec<f64>) -> Result<Self, SolverError> {
        let measure = EmpiricalMeasure::new(dim, states).map_err(|e| SolverError::Config(e.to_string()))?;
        let n = measure.len();
        let sup_sq = measure.points().map(crate::vecops::norm_sq).collect();
        Ok(ParticleEnsemble {
            initial: measure.as_flat().to_vec(),
            measure,
            k_accum: vec![0.0; n * dim],
            k_variation: vec![0.0; n],
            increments: vec![0.0; n * dim],
            last_dk: vec![0.0; n * dim],
            sup_sq,
            step_index: 0,
            time: 0.0,
        })
    }

    /// Draws `ξ` per the configuration, particle `i` from its own stream.
    pub fn from_config(cfg: &SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let d = cfg.initial.dim();
        let n = cfg.n_particles;
        let states = match &cfg.initial {
            InitialCondition::Constant { value } => value.repeat(n),
            InitialCondition::Gaussian { mean, std } => {
                let mut s = vec![0.0; n * d];
                s.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
                    let mut rng = stream_rng(cfg.seed, Purpose::Initial, i as u64);
                    crate::noise::fill_normals(&mut rng, x);
                    for (v, m) in x.iter_mut().zip(mean) {
                        *v = m + std * *v;
                    }
                });
                s
            }
        };
        Self::new(d, states)
    }

    /// Fails if a particle starts outside `D(A)`.
    pub(crate) fn check_domain(&self, op: &MonotoneOperator) -> Result<(), SolverError> {
        if op.full_domain() {
            return Ok(());
        }
        for (i, x) in self.measure.points().enumerate() {
            if !op.in_domain(x, MEMBERSHIP_TOL) {
                return Err(SolverError::Config(format!(
                    "initial state of particle {i} lies outside the operator domain"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// `X^i_k`, flat.
    pub fn states(&self) -> &[f64] {
        self.measure.as_flat()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        self.measure.point(i)
    }

    /// Empirical law of the current states.
    pub fn measure(&self) -> &EmpiricalMeasure {
        &self.measure
    }

    /// `ξ^i`.
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Unscaled `K^i_k`.
    pub fn k_accum(&self) -> &[f64] {
        &self.k_accum
    }

    /// `Σ |ΔK^i|`, a proxy for the total variation of `K^i`.
    pub fn k_variation(&self) -> &[f64] {
        &self.k_variation
    }

    /// `ΔK^i` of the most recent step (zero before the first step).
    pub fn last_dk(&self) -> &[f64] {
        &self.last_dk
    }

    /// Running sum of the non-`K` increments.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `max_{s ≤ t} |X^i_s|²` over the grid.
    pub fn sup_sq(&self) -> &[f64] {
        &self.sup_sq
    }

    /// Largest `|X − (ξ − εK + increments)|` over all particles.
    pub fn reconstruction_error(&self, epsilon: f64) -> f64 {
        let x = self.states();
        (0..x.len())
            .map(|j| (x[j] - (self.initial[j] - epsilon * self.k_accum[j] + self.increments[j])).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn guard(particle: usize, step: usize, time: f64, x: &[f64]) -> Result<(), SolverError> {
        let r = norm(x);
        if r.is_finite() && r <= super::BLOW_UP_NORM {
            Ok(())
        } else {
            Err(SolverError::BlowUp { particle, step, time, norm: r })
        }
    }
}
