//! Coefficient triples `(b, σ, f)`, their regularity data, and estimators
//! for the time-averaging conditions.
//!
//! Coefficients are anything implementing [`Coefficients`]; the built-in
//! [`Catalog`] covers the systems the experiments need and is what the
//! configuration file selects from. Averaged coefficients are ordinary
//! [`Coefficients`] that happen to ignore `t`.

mod averaging;
mod catalog;
mod modulus;

pub use averaging::{audit_inherited_bounds, time_average_defect, AveragingDefect, InheritedBoundsReport};
pub use catalog::{Catalog, Modulation};
pub use modulus::{modulus_eval, Modulus};

use std::fmt::Debug;
use std::sync::Arc;

use thiserror::Error;

use crate::measure::EmpiricalMeasure;
use crate::noise::JumpLaw;
use crate::noise::PointSource;
use crate::vecops::{frob_sq, norm_sq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("invalid coefficient input: {0}")]
    InvalidInput(String),
    #[error("{what} is not finite at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
}

/// Evaluable `b: [0,∞)×R^d×M₂ → R^d`, `σ → R^{d×m}`, `f → R^d`.
///
/// Matrices are row-major `d × m`. Implementations write into `out` and must
/// overwrite every entry.
pub trait Coefficients: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);
    fn jump(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, u: &[f64], out: &mut [f64]);

    /// `f(t,x,μ,·)` is linear in the mark, so `∫ f v(du) = rate · f(t,x,μ,E u)`.
    fn jump_is_mark_linear(&self) -> bool {
        false
    }

    /// `f ≡ 0`; lets the solver skip jump handling entirely.
    fn jump_vanishes(&self) -> bool {
        false
    }
}

/// A coefficient triple together with its declared regularity data.
///
/// `kappa`, `phi`, `beta`, `l1` and `l2` are the constants of the
/// continuity and growth conditions
/// `|b(x,μ)−b(y,ν)|² + ‖σ(x,μ)−σ(y,ν)‖² ≤ L₁ κ(β|x−y|² + ρ²(μ,ν))` and
/// `|b|² + ‖σ‖² ≤ L₂ (1 + |x|² + ‖μ‖₂²)`. The bound functions are taken
/// constant in time.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub model: Arc<dyn Coefficients>,
    pub beta: f64,
    pub kappa: Modulus,
    pub phi: Modulus,
    pub l1: f64,
    pub l2: f64,
    pub jump_law: Option<JumpLaw>,
}

impl CoefficientSet {
    pub fn new(model: Arc<dyn Coefficients>, jump_law: Option<JumpLaw>) -> Self {
        CoefficientSet {
            model,
            beta: 1.0,
            kappa: Modulus::Linear { l: 1.0 },
            phi: Modulus::Linear { l: 1.0 },
            l1: 1.0,
            l2: 1.0,
            jump_law,
        }
    }

    pub fn from_catalog(entry: Catalog, jump_law: Option<JumpLaw>) -> Result<Self, CoefficientError> {
        entry.validate()?;
        if let Some(law) = &jump_law {
            if law.mark_dim != entry.mark_dim() {
                return Err(CoefficientError::InvalidInput(format!(
                    "jump marks have dimension {} but the coefficients expect {}",
                    law.mark_dim,
                    entry.mark_dim()
                )));
            }
        }
        let l2 = entry.growth_constant();
        let mut set = CoefficientSet::new(Arc::new(entry), jump_law);
        set.l1 = l2;
        set.l2 = l2;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), CoefficientError> {
        self.kappa.validate()?;
        self.phi.validate()?;
        for (name, v) in [("beta", self.beta), ("L1", self.l1), ("L2", self.l2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoefficientError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.model.noise_dim()
    }

    /// Jumps are active: a law with positive rate and a nonvanishing `f`.
    pub fn has_jumps(&self) -> bool {
        matches!(&self.jump_law, Some(l) if l.total_rate > 0.0) && !self.model.jump_vanishes()
    }

    /// Worst ratio of `|b|²+‖σ‖²` and of `|f|²/‖u‖²` to `L₂(1+|x|²+‖μ‖₂²)`
    /// over `n` sampled `(x, μ)`; values above 1 violate the growth bound.
    pub fn growth_audit(&self, sampler: &mut dyn PointSource, n: usize, t: f64) -> GrowthAudit {
        let d = self.dim();
        let m = self.noise_dim();
        let mut b = vec![0.0; d];
        let mut s = vec![0.0; d * m];
        let mut f = vec![0.0; d];
        let mut mark_rng = crate::noise::stream_rng(0, crate::noise::Purpose::Audit, 7);
        let mut audit = GrowthAudit { samples: n, worst_drift_ratio: 0.0, worst_jump_ratio: 0.0 };
        for _ in 0..n {
            let x = sampler.sample();
            let mu = sample_measure(sampler, d, MEASURE_POINTS);
            let scale = 1.0 + norm_sq(&x) + mu.second_moment();
            self.model.drift(t, &x, &mu, &mut b);
            self.model.diffusion(t, &x, &mu, &mut s);
            let r = (norm_sq(&b) + frob_sq(&s)) / (self.l2 * scale);
            audit.worst_drift_ratio = audit.worst_drift_ratio.max(r);
            if let Some(law) = &self.jump_law {
                let u = law.sample_mark(&mut mark_rng);
                let uu = norm_sq(&u);
                if uu > 0.0 {
                    self.model.jump(t, &x, &mu, &u, &mut f);
                    let r = norm_sq(&f) / (self.l2 * uu * scale);
                    audit.worst_jump_ratio = audit.worst_jump_ratio.max(r);
                }
            }
        }
        audit
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthAudit {
    pub samples: usize,
    pub worst_drift_ratio: f64,
    pub worst_jump_ratio: f64,
}

impl GrowthAudit {
    pub fn passed(&self) -> bool {
        self.worst_drift_ratio <= 1.0 + 1e-12 && self.worst_jump_ratio <= 1.0 + 1e-12
    }
}

/// Particles per synthetic measure in the sampling audits.
pub const MEASURE_POINTS: usize = 16;

pub fn sample_measure(sampler: &mut dyn PointSource, dim: usize, n: usize) -> EmpiricalMeasure {
    let mut pts = Vec::with_capacity(n * dim);
    for _ in 0..n {
        pts.extend(sampler.sample());
    }
    EmpiricalMeasure::from_states(dim, pts)
}
