use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ConvexSet, MonotoneError};
use crate::vecops::norm;

/// Convex functions whose subdifferential is in the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexFunction {
    /// `w · Σ|x_i|`
    L1Norm { weight: f64 },
    /// `w · |x|`
    EuclideanNorm { weight: f64 },
}

impl ConvexFunction {
    fn weight(&self) -> f64 {
        match self {
            ConvexFunction::L1Norm { weight } | ConvexFunction::EuclideanNorm { weight } => *weight,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunction::L1Norm { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ConvexFunction::EuclideanNorm { weight } => weight * norm(x),
        }
    }

    fn prox_into(&self, lambda: f64, x: &mut [f64]) {
        let t = lambda * self.weight();
        match self {
            ConvexFunction::L1Norm { .. } => {
                for v in x.iter_mut() {
                    *v = v.signum() * (v.abs() - t).max(0.0);
                }
            }
            ConvexFunction::EuclideanNorm { .. } => {
                let r = norm(x);
                let s = if r > t { 1.0 - t / r } else { 0.0 };
                for v in x.iter_mut() {
                    *v *= s;
                }
            }
        }
    }

    fn minimal_subgradient(&self, x: &[f64]) -> Vec<f64> {
        let w = self.weight();
        match self {
            ConvexFunction::L1Norm { .. } => x
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { w * v.signum() })
                .collect(),
            ConvexFunction::EuclideanNorm { .. } => {
                let r = norm(x);
                if r == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|v| w * v / r).collect()
                }
            }
        }
    }
}

/// A maximal monotone operator from the closed catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneOperator {
    Zero,
    NormalCone { set: ConvexSet },
    Subdifferential { function: ConvexFunction },
    /// Linear map `x ↦ Mx` with `M + Mᵀ` positive semidefinite; rows of `M`.
    LinearPsd { matrix: Vec<Vec<f64>> },
}

/// Result of evaluating the minimal section `A°(x) = proj_{A(x)}(0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum MinimalSection {
    Finite(Vec<f64>),
    /// `x ∉ D(A)`, so `A(x)` is empty and the projection is taken as ∞.
    Infinite,
}

impl MinimalSection {
    pub fn is_infinite(&self) -> bool {
        matches!(self, MinimalSection::Infinite)
    }

    pub fn finite(&self) -> Option<&[f64]> {
        match self {
            MinimalSection::Finite(v) => Some(v),
            MinimalSection::Infinite => None,
        }
    }
}

impl MonotoneOperator {
    pub fn normal_cone(set: ConvexSet) -> Result<Self, MonotoneError> {
        set.validate()?;
        Ok(MonotoneOperator::NormalCone { set })
    }

    pub fn subdifferential(function: ConvexFunction) -> Result<Self, MonotoneError> {
        let op = MonotoneOperator::Subdifferential { function };
        op.validate()?;
        Ok(op)
    }

    pub fn linear_psd(matrix: Vec<Vec<f64>>) -> Result<Self, MonotoneError> {
        let op = MonotoneOperator::LinearPsd { matrix };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<(), MonotoneError> {
        match self {
            MonotoneOperator::Zero => Ok(()),
            MonotoneOperator::NormalCone { set } => set.validate(),
            MonotoneOperator::Subdifferential { function } => {
                let w = function.weight();
                if !(w.is_finite() && w >= 0.0) {
                    return Err(MonotoneError::InvalidInput(
                        "subdifferential weight must be finite and nonnegative".into(),
                    ));
                }
                Ok(())
            }
            MonotoneOperator::LinearPsd { matrix } => {
                let d = matrix.len();
                if d == 0 || matrix.iter().any(|r| r.len() != d) {
                    return Err(MonotoneError::InvalidInput("matrix must be square and nonempty".into()));
                }
                if !matrix.iter().flatten().all(|v| v.is_finite()) {
                    return Err(MonotoneError::InvalidInput("matrix entries must be finite".into()));
                }
                let m = DMatrix::from_fn(d, d, |i, j| matrix[i][j]);
                let sym = (&m + m.transpose()) * 0.5;
                let min_eig = sym.symmetric_eigenvalues().min();
                if min_eig < -1e-12 {
                    return Err(MonotoneError::InvalidInput(format!(
                        "symmetric part is not positive semidefinite (min eigenvalue {min_eig:.3e})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Dimension the operator is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MonotoneOperator::Zero | MonotoneOperator::Subdifferential { .. } => None,
            MonotoneOperator::NormalCone { set } => Some(set.dim()),
            MonotoneOperator::LinearPsd { matrix } => Some(matrix.len()),
        }
    }

    /// Whether `D(A) = R^d`. Normal cones restrict the domain to their set.
    pub fn full_domain(&self) -> bool {
        !matches!(self, MonotoneOperator::NormalCone { .. })
    }

    /// Whether `x ∈ D(A)` up to `tol`.
    pub fn in_domain(&self, x: &[f64], tol: f64) -> bool {
        match self {
            MonotoneOperator::NormalCone { set } => set.contains(x, tol),
            _ => true,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), MonotoneError> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(MonotoneError::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(MonotoneError::InvalidInput("non-finite point".into()));
        }
        Ok(())
    }

    /// Precompute `J_λ` for repeated application at a fixed `λ`.
    pub fn prepare(&self, lambda: f64) -> Result<PreparedResolvent<'_>, MonotoneError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(MonotoneError::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        Ok(match self {
            MonotoneOperator::Zero => PreparedResolvent::Identity,
            MonotoneOperator::NormalCone { set } => PreparedResolvent::Projection(set),
            MonotoneOperator::Subdifferential { function } => {
                PreparedResolvent::Prox { function, lambda }
            }
            MonotoneOperator::LinearPsd { matrix } => {
                let d = matrix.len();
                let m = DMatrix::from_fn(d, d, |i, j| {
                    (if i == j { 1.0 } else { 0.0 }) + lambda * matrix[i][j]
                });
                // I + λM is invertible: its symmetric part is ⪰ I.
                let inv = m.try_inverse().ok_or_else(|| {
                    MonotoneError::InvalidInput("I + λM is singular".into())
                })?;
                PreparedResolvent::Linear { inverse: inv, dim: d }
            }
        })
    }

    /// `J_λ(x) = (I + λA)⁻¹ x`.
    pub fn resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>, MonotoneError> {
        self.check_point(x)?;
        let mut y = x.to_vec();
        self.prepare(lambda)?.apply(&mut y)?;
        Ok(y)
    }

    /// Yosida approximation `A_λ(x) = (x − J_λ x)/λ`.
    pub fn yosida(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>, MonotoneError> {
        let j = self.resolvent(lambda, x)?;
        Ok(x.iter().zip(&j).map(|(a, b)| (a - b) / lambda).collect())
    }

    /// Least-norm element of `A(x)`.
    pub fn minimal_section(&self, x: &[f64]) -> Result<MinimalSection, MonotoneError> {
        self.check_point(x)?;
        Ok(match self {
            MonotoneOperator::Zero => MinimalSection::Finite(vec![0.0; x.len()]),
            MonotoneOperator::NormalCone { set } => {
                // N_C(x) is a cone containing 0 for x ∈ C and empty outside.
                if set.contains(x, 0.0) {
                    MinimalSection::Finite(vec![0.0; x.len()])
                } else {
                    MinimalSection::Infinite
                }
            }
            MonotoneOperator::Subdifferential { function } => {
                MinimalSection::Finite(function.minimal_subgradient(x))
            }
            MonotoneOperator::LinearPsd { matrix } => MinimalSection::Finite(
                matrix.iter().map(|row| crate::vecops::dot(row, x)).collect(),
            ),
        })
    }
}

/// `J_λ` with any per-`λ` work done up front.
#[derive(Debug, Clone)]
pub enum PreparedResolvent<'a> {
    Identity,
    Projection(&'a ConvexSet),
    Prox { function: &'a ConvexFunction, lambda: f64 },
    Linear { inverse: DMatrix<f64>, dim: usize },
}

impl PreparedResolvent<'_> {
    pub fn apply(&self, x: &mut [f64]) -> Result<(), MonotoneError> {
        match self {
            PreparedResolvent::Identity => Ok(()),
            PreparedResolvent::Projection(set) => set.project_into(x),
            PreparedResolvent::Prox { function, lambda } => {
                function.prox_into(*lambda, x);
                Ok(())
            }
            PreparedResolvent::Linear { inverse, dim } => {
                if x.len() != *dim {
                    return Err(MonotoneError::DimensionMismatch { expected: *dim, got: x.len() });
                }
                let y = inverse * DVector::from_column_slice(x);
                x.copy_from_slice(y.as_slice());
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfline() -> MonotoneOperator {
        MonotoneOperator::normal_cone(ConvexSet::nonnegative(1, 0)).unwrap()
    }

    #[test]
    fn zero_resolvent_is_identity() {
        let r = MonotoneOperator::Zero.resolvent(0.5, &[3.0, -1.0]).unwrap();
        assert_eq!(r, vec![3.0, -1.0]);
    }

    #[test]
    fn normal_cone_resolvent_projects() {
        assert_eq!(halfline().resolvent(1.0, &[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn linear_identity_resolvent() {
        let op = MonotoneOperator::linear_psd(vec![vec![1.0]]).unwrap();
        assert!((op.resolvent(1.0, &[4.0]).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn yosida_examples() {
        assert_eq!(MonotoneOperator::Zero.yosida(0.3, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(halfline().yosida(0.5, &[-1.0]).unwrap(), vec![-2.0]);
        let op = MonotoneOperator::linear_psd(vec![vec![1.0]]).unwrap();
        assert!((op.yosida(1.0, &[4.0]).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn minimal_section_examples() {
        let abs = MonotoneOperator::subdifferential(ConvexFunction::L1Norm { weight: 1.0 }).unwrap();
        assert_eq!(abs.minimal_section(&[0.0]).unwrap(), MinimalSection::Finite(vec![0.0]));
        assert_eq!(abs.minimal_section(&[2.0]).unwrap(), MinimalSection::Finite(vec![1.0]));
        let unit = MonotoneOperator::normal_cone(ConvexSet::cube(vec![0.0], vec![1.0]).unwrap()).unwrap();
        assert_eq!(unit.minimal_section(&[0.5]).unwrap(), MinimalSection::Finite(vec![0.0]));
        assert!(unit.minimal_section(&[1.5]).unwrap().is_infinite());
    }

    #[test]
    fn prox_of_l1_is_soft_threshold() {
        let abs = MonotoneOperator::subdifferential(ConvexFunction::L1Norm { weight: 1.0 }).unwrap();
        assert_eq!(abs.resolvent(0.5, &[2.0, -0.2, -1.0]).unwrap(), vec![1.5, 0.0, -0.5]);
    }

    #[test]
    fn euclidean_prox_shrinks_radially() {
        let op = MonotoneOperator::subdifferential(ConvexFunction::EuclideanNorm { weight: 2.0 }).unwrap();
        let y = op.resolvent(0.5, &[3.0, 4.0]).unwrap();
        assert!((y[0] - 2.4).abs() < 1e-14 && (y[1] - 3.2).abs() < 1e-14);
        assert_eq!(op.resolvent(0.5, &[0.3, 0.4]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn resolvent_inverts_inclusion_for_linear() {
        // x = y + λ M y
        let op = MonotoneOperator::linear_psd(vec![vec![2.0, 1.0], vec![-1.0, 0.5]]).unwrap();
        let x = [0.7, -1.3];
        let y = op.resolvent(0.25, &x).unwrap();
        let my = [2.0 * y[0] + y[1], -y[0] + 0.5 * y[1]];
        assert!((y[0] + 0.25 * my[0] - x[0]).abs() < 1e-14);
        assert!((y[1] + 0.25 * my[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        assert!(MonotoneOperator::linear_psd(vec![vec![-1.0]]).is_err());
        // Skew-symmetric is monotone.
        assert!(MonotoneOperator::linear_psd(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).is_ok());
    }

    #[test]
    fn invalid_inputs() {
        assert!(MonotoneOperator::Zero.resolvent(0.0, &[1.0]).is_err());
        assert!(MonotoneOperator::Zero.resolvent(1.0, &[f64::NAN]).is_err());
        assert!(halfline().resolvent(1.0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn domain_flags() {
        assert!(MonotoneOperator::Zero.full_domain());
        assert!(!halfline().full_domain());
        assert!(halfline().in_domain(&[0.0], 0.0));
        assert!(!halfline().in_domain(&[-0.1], 1e-10));
    }
}
