use super::{MonotoneError, MonotoneOperator};
use crate::noise::PointSource;
use crate::vecops::dot;

/// Outcome of sampling graph pairs and checking `⟨x₁−x₂, y₁−y₂⟩ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityAudit {
    pub pairs: usize,
    pub min_inner: f64,
    pub violations: usize,
    pub tolerance: f64,
    pub lambda: f64,
}

impl MonotonicityAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `n` point pairs and maps each point `x` to the graph pair
/// `(J_λ x, A_λ x)`, which lies in `Gr(A)` for every `λ > 0`.
pub fn audit_monotonicity(
    op: &MonotoneOperator,
    sampler: &mut dyn PointSource,
    n: usize,
    lambda: f64,
    tolerance: f64,
) -> Result<MonotonicityAudit, MonotoneError> {
    if n == 0 {
        return Err(MonotoneError::InvalidInput("audit needs at least one pair".into()));
    }
    let prepared = op.prepare(lambda)?;
    let graph_point = |x: Vec<f64>| -> Result<(Vec<f64>, Vec<f64>), MonotoneError> {
        let mut j = x.clone();
        prepared.apply(&mut j)?;
        let a = x.iter().zip(&j).map(|(xi, ji)| (xi - ji) / lambda).collect();
        Ok((j, a))
    };
    let mut min_inner = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..n {
        let (x1, y1) = graph_point(sampler.sample())?;
        let (x2, y2) = graph_point(sampler.sample())?;
        let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
        let ip = dot(&dx, &dy);
        min_inner = min_inner.min(ip);
        if ip < -tolerance {
            violations += 1;
        }
    }
    Ok(MonotonicityAudit { pairs: n, min_inner, violations, tolerance, lambda })
}
