//! Interacting-particle discretization with an implicit step for the
//! monotone operator.
//!
//! One step of the resolvent-split scheme, for each particle `i`:
//!
//! ```text
//! Y    = X_k + ε b h + √ε σ ΔB + √ε [Σ_{jumps} f(t_j, X_{t_j−}, μ̂_k, u_j) − h ∫ f v(du)]
//! X_{k+1} = J_{εh}(Y),    ΔK = (Y − X_{k+1}) / ε
//! ```
//!
//! with `μ̂_k` the empirical law at the start of the step. `ΔK` lies in
//! `h A(X_{k+1})` by the definition of the resolvent. `K` is accumulated
//! unscaled; the state sees `ε K`.

mod ensemble;
mod run;
mod step;

pub use ensemble::ParticleEnsemble;
pub use run::{
    discrete_flow_monotonicity, simulate, simulate_coupled, simulate_from, simulate_observed,
    CoupledRecord, FlowMonotonicityReport, Snapshot, StepObserver, TrajectoryRecord,
};
pub use step::Stepper;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::monotone::MonotoneError;

/// States beyond this norm abort the run.
pub const BLOW_UP_NORM: f64 = 1e8;

/// Marks per step for Monte Carlo compensators of mark-nonlinear `f`.
pub const COMPENSATOR_MARKS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("resolvent failed at step {step}, particle {particle}: {source}")]
    Operator { step: usize, particle: usize, source: MonotoneError },
    #[error("particle {particle} blew up at step {step} (t = {time}): |X| = {norm:e}")]
    BlowUp { particle: usize, step: usize, time: f64, norm: f64 },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error("observer failed at step {step}: {message}")]
    Observer { step: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Backward step on `A` through `J_{εh}`.
    ResolventSplit,
    /// Explicit step on the Yosida approximation `A_λ` at fixed `λ`.
    YosidaExplicit { lambda: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Every particle starts at `value`.
    Constant { value: Vec<f64> },
    /// i.i.d. `N(mean, std² I)` starting points.
    Gaussian { mean: Vec<f64>, std: f64 },
}

impl InitialCondition {
    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Constant { value } => value.len(),
            InitialCondition::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, InitialCondition::Constant { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_particles: usize,
    pub step: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub epsilon: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    /// Keep every per-step ensemble in the trajectory record.
    #[serde(default)]
    pub retain_snapshots: bool,
}

impl SolverConfig {
    pub fn new(n_particles: usize, step: f64, horizon: f64, initial: InitialCondition) -> Self {
        SolverConfig {
            n_particles,
            step,
            horizon,
            scheme: Scheme::ResolventSplit,
            epsilon: 1.0,
            seed: 0,
            initial,
            retain_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.n_particles == 0 {
            return bad("need at least one particle".into());
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return bad(format!("horizon must be nonnegative, got {}", self.horizon));
        }
        let n = (self.horizon / self.step).round();
        if (n * self.step - self.horizon).abs() > 1e-9 * self.horizon.max(self.step) {
            return bad(format!("T not an integer multiple of h (T = {}, h = {})", self.horizon, self.step));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Scheme::YosidaExplicit { lambda } = self.scheme {
            if !(lambda.is_finite() && lambda > 0.0) {
                return bad(format!("Yosida lambda must be positive, got {lambda}"));
            }
        }
        match &self.initial {
            InitialCondition::Constant { value } if value.iter().any(|v| !v.is_finite()) => {
                return bad("initial value is not finite".into())
            }
            InitialCondition::Gaussian { mean, std }
                if mean.iter().any(|v| !v.is_finite()) || !(std.is_finite() && *std >= 0.0) =>
            {
                return bad("gaussian initial condition needs a finite mean and std ≥ 0".into())
            }
            _ => {}
        }
        if self.initial.dim() == 0 {
            return bad("initial condition has dimension 0".into());
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}
