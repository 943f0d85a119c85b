//! Empirical probability measures of particle ensembles and computable
//! bounds on the distance between them.
//!
//! The weak-topology metric on M₂(R^d) is a supremum over a function ball
//! and has no constructive evaluation. Two computable quantities bracket
//! what we need: the index-coupled RMS distance, an upper bound for any
//! coupling-dominated metric, and the exact 1-d W₂ from order statistics.

use thiserror::Error;

use crate::vecops::{dist_sq, norm_sq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    InvalidInput(String),
}

/// Uniform-weight empirical measure `(1/N) Σ δ_{x_i}` on R^d.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    mean: Vec<f64>,
    second_moment: f64,
}

impl EmpiricalMeasure {
    /// `points` is particle-major: `N × dim`.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::InvalidInput("dimension must be positive".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(MeasureError::InvalidInput(format!(
                "expected a nonempty N × {dim} array, got {} values",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::InvalidInput(format!("particle {} is not finite", i / dim)));
        }
        Ok(Self::from_states(dim, points))
    }

    /// Builds the measure from solver states already known to be finite.
    pub(crate) fn from_states(dim: usize, points: Vec<f64>) -> Self {
        let n = points.len() / dim;
        let mut mean = vec![0.0; dim];
        let mut sq = 0.0;
        for p in points.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
            sq += norm_sq(p);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        EmpiricalMeasure { dim, points, mean, second_moment: sq / n as f64 }
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self, MeasureError> {
        let d = point.len();
        Self::new(d, point)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.points
    }

    /// `∫ y μ(dy)`.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `‖μ‖₂² = ∫|x|² μ(dx)`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Average of `g` over the particles.
    pub fn integrate(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points().map(&mut g).sum::<f64>() / self.len() as f64
    }
}

/// `‖μ‖₂²`.
pub fn second_moment(mu: &EmpiricalMeasure) -> f64 {
    mu.second_moment()
}

/// `√((1/N) Σ |x_i − y_i|²)` for index-matched ensembles. Upper-bounds the
/// distance between the two empirical laws.
pub fn coupled_rms_distance(x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    if x.len() != y.len() || x.dim() != y.dim() {
        return Err(MeasureError::InvalidInput(format!(
            "coupled ensembles differ in shape: {}×{} vs {}×{}",
            x.len(),
            x.dim(),
            y.len(),
            y.dim()
        )));
    }
    let s: f64 = x.points().zip(y.points()).map(|(a, b)| dist_sq(a, b)).sum();
    Ok((s / x.len() as f64).sqrt())
}

/// Exact W₂ between 1-d empirical measures by matching quantile functions.
pub fn wasserstein2_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(MeasureError::InvalidInput("wasserstein2_1d needs 1-d measures".into()));
    }
    let mut a = mu.as_flat().to_vec();
    let mut b = nu.as_flat().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == m {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / n as f64).sqrt());
    }
    // Masses in units of 1/(n m): each atom of μ carries m, each of ν carries n.
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (m, n);
    let mut s = 0.0;
    while i < n && j < m {
        let w = ra.min(rb);
        s += w as f64 * (a[i] - b[j]) * (a[i] - b[j]);
        ra -= w;
        rb -= w;
        if ra == 0 {
            i += 1;
            ra = m;
        }
        if rb == 0 {
            j += 1;
            rb = n;
        }
    }
    Ok((s / (n * m) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(second_moment(&EmpiricalMeasure::dirac(vec![0.0, 0.0]).unwrap()), 0.0);
        assert_eq!(second_moment(&EmpiricalMeasure::dirac(vec![3.0, 4.0]).unwrap()), 25.0);
        assert_eq!(second_moment(&m1(&[-1.0, 1.0])), 1.0);
    }

    #[test]
    fn coupled_examples() {
        let x = EmpiricalMeasure::new(2, vec![0.0; 6]).unwrap();
        let y = EmpiricalMeasure::new(2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(coupled_rms_distance(&x, &x).unwrap(), 0.0);
        assert_eq!(coupled_rms_distance(&x, &y).unwrap(), 1.0);
        assert_eq!(coupled_rms_distance(&m1(&[0.0, 2.0]), &m1(&[1.0, 1.0])).unwrap(), 1.0);
        assert!(coupled_rms_distance(&m1(&[0.0]), &m1(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn w2_examples() {
        assert_eq!(wasserstein2_1d(&m1(&[2.5]), &m1(&[-1.0])).unwrap(), 3.5);
        assert_eq!(wasserstein2_1d(&m1(&[3.0, 1.0, 2.0]), &m1(&[1.0, 2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(wasserstein2_1d(&m1(&[0.0, 2.0]), &m1(&[1.0, 3.0])).unwrap(), 1.0);
        assert_eq!(wasserstein2_1d(&m1(&[0.0, 2.0]), &m1(&[1.0])).unwrap(), 1.0);
        assert_eq!(wasserstein2_1d(&m1(&[3.0, 0.0, 1.0, 2.0]), &m1(&[2.5, 0.5])).unwrap(), 0.5);
        let two = EmpiricalMeasure::new(2, vec![0.0, 0.0]).unwrap();
        assert!(wasserstein2_1d(&two, &two).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EmpiricalMeasure::new(1, vec![]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn cached_mean() {
        let m = EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(m.mean(), &[2.0, 4.0]);
        assert_eq!(m.second_moment(), (1.0 + 4.0 + 9.0 + 36.0) / 2.0);
    }
}
