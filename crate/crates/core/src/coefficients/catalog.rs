use serde::{Deserialize, Serialize};

use super::{CoefficientError, Coefficients};
use crate::measure::EmpiricalMeasure;
use crate::vecops::norm_sq;

/// Time factor multiplying the drift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    #[default]
    None,
    /// `sin²(t)`, whose long-time average is `½`.
    Sin2,
    /// The constant `½`.
    Half,
}

impl Modulation {
    pub fn factor(self, t: f64) -> f64 {
        match self {
            Modulation::None => 1.0,
            Modulation::Sin2 => {
                let s = t.sin();
                s * s
            }
            Modulation::Half => 0.5,
        }
    }
}

/// Built-in coefficient systems, selected by name in configuration files.
///
/// All entries use `m = d` noise dimensions and `d`-dimensional marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Catalog {
    /// `b = 0`, `σ = 0`, `f = 0`.
    Zero { dim: usize },
    /// `b = m(t)(−a x + c ∫y μ(dy))`, `σ = s I`, `f = γ u`.
    LinearMeanField {
        dim: usize,
        a: f64,
        c: f64,
        sigma: f64,
        gamma: f64,
        #[serde(default)]
        modulation: Modulation,
    },
    /// `b = −a |x|² x`, `σ = s I`, `f = 0`. Violates linear growth.
    Cubic { dim: usize, a: f64, sigma: f64 },
}

impl Catalog {
    pub const NAMES: [&'static str; 3] = ["zero", "linear_mean_field", "cubic"];

    pub fn validate(&self) -> Result<(), CoefficientError> {
        let d = self.dim_value();
        if d == 0 {
            return Err(CoefficientError::InvalidInput("dimension must be at least 1".into()));
        }
        let params: Vec<(&str, f64)> = match *self {
            Catalog::Zero { .. } => vec![],
            Catalog::LinearMeanField { a, c, sigma, gamma, .. } => {
                vec![("a", a), ("c", c), ("sigma", sigma), ("gamma", gamma)]
            }
            Catalog::Cubic { a, sigma, .. } => vec![("a", a), ("sigma", sigma)],
        };
        for (name, v) in params {
            if !v.is_finite() {
                return Err(CoefficientError::InvalidInput(format!("parameter {name} is not finite")));
            }
        }
        Ok(())
    }

    fn dim_value(&self) -> usize {
        match *self {
            Catalog::Zero { dim } | Catalog::LinearMeanField { dim, .. } | Catalog::Cubic { dim, .. } => dim,
        }
    }

    pub fn mark_dim(&self) -> usize {
        self.dim_value()
    }

    /// A constant `L₂` for the growth bound; infinite for the cubic entry.
    pub fn growth_constant(&self) -> f64 {
        match *self {
            Catalog::Zero { .. } => 1.0,
            Catalog::LinearMeanField { dim, a, c, sigma, gamma, .. } => {
                // |−ax + c m|² ≤ 2a²|x|² + 2c²‖μ‖₂², ‖sI‖² = d s².
                let v = (2.0 * a * a).max(2.0 * c * c).max(dim as f64 * sigma * sigma).max(gamma * gamma);
                v.max(1e-12)
            }
            Catalog::Cubic { .. } => f64::INFINITY,
        }
    }
}

impl Coefficients for Catalog {
    fn dim(&self) -> usize {
        self.dim_value()
    }

    fn noise_dim(&self) -> usize {
        self.dim_value()
    }

    fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        match *self {
            Catalog::Zero { .. } => out.fill(0.0),
            Catalog::LinearMeanField { a, c, modulation, .. } => {
                let w = modulation.factor(t);
                for ((o, xi), mi) in out.iter_mut().zip(x).zip(mu.mean()) {
                    *o = w * (-a * xi + c * mi);
                }
            }
            Catalog::Cubic { a, .. } => {
                let r = norm_sq(x);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -a * r * xi;
                }
            }
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure, out: &mut [f64]) {
        out.fill(0.0);
        let s = match *self {
            Catalog::Zero { .. } => return,
            Catalog::LinearMeanField { sigma, .. } | Catalog::Cubic { sigma, .. } => sigma,
        };
        let d = self.dim_value();
        for i in 0..d {
            out[i * d + i] = s;
        }
    }

    fn jump(&self, _t: f64, _x: &[f64], _mu: &EmpiricalMeasure, u: &[f64], out: &mut [f64]) {
        match *self {
            Catalog::LinearMeanField { gamma, .. } => {
                for (o, ui) in out.iter_mut().zip(u) {
                    *o = gamma * ui;
                }
            }
            _ => out.fill(0.0),
        }
    }

    fn jump_is_mark_linear(&self) -> bool {
        true
    }

    fn jump_vanishes(&self) -> bool {
        match *self {
            Catalog::LinearMeanField { gamma, .. } => gamma == 0.0,
            _ => true,
        }
    }
}
