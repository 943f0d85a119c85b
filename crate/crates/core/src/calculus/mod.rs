//! Test functions with analytic L-derivatives, the mean-field generator,
//! an Itô-formula residual along simulated paths, and Bihari envelopes.
//!
//! Functions of the measure are differentiated in the Lions sense: for
//! `h(μ) = g(∫φ dμ)`, `∂_μ h(μ)(y) = g′(∫φ dμ) ∇φ(y)`. Derivatives are
//! supplied as callbacks; nothing is differentiated numerically.

mod bihari;
mod functions;
mod generator;
mod ito;

pub use bihari::{bihari_bound, BihariValue};
pub use functions::TestFunction;
pub(crate) use generator::Generator;
pub use generator::{generator_apply, GeneratorOptions, GeneratorTerms};
pub use ito::{ito_residual, ItoAccumulator, ItoObserver, ItoReport};

use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::measure::EmpiricalMeasure;
use crate::solver::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("{function} does not provide {derivative}")]
    MissingDerivative { function: String, derivative: &'static str },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `h(t, x, μ)` together with the derivatives the generator needs.
///
/// Matrix outputs are row-major `d × d`. Derivatives default to a
/// [`CalculusError::MissingDerivative`] error.
pub trait LyapunovFunction: Send + Sync {
    fn name(&self) -> String;

    fn value(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> f64;

    /// `∂_t h`.
    fn dt(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure) -> Result<f64, CalculusError> {
        Err(self.missing("∂_t h"))
    }

    /// `∂_x h`.
    fn dx(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure, _out: &mut [f64]) -> Result<(), CalculusError> {
        Err(self.missing("∂_x h"))
    }

    /// `∂²_x h`.
    fn dxx(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure, _out: &mut [f64]) -> Result<(), CalculusError> {
        Err(self.missing("∂²_x h"))
    }

    /// `∂_μ h(t, x, μ)(y)`.
    fn dmu(
        &self,
        _t: f64,
        _x: &[f64],
        _mu: &EmpiricalMeasure,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<(), CalculusError> {
        Err(self.missing("∂_μ h"))
    }

    /// `∂_y ∂_μ h(t, x, μ)(y)`.
    fn dy_dmu(
        &self,
        _t: f64,
        _x: &[f64],
        _mu: &EmpiricalMeasure,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<(), CalculusError> {
        Err(self.missing("∂_y∂_μ h"))
    }

    /// `∂_μ h` and `∂_y∂_μ h` do not depend on `x`, so measure integrals
    /// can be shared by all particles.
    fn dmu_independent_of_x(&self) -> bool {
        false
    }

    fn missing(&self, derivative: &'static str) -> CalculusError {
        CalculusError::MissingDerivative { function: self.name(), derivative }
    }
}
