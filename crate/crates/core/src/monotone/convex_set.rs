use serde::{Deserialize, Serialize};

use super::{MonotoneError, DYKSTRA_MAX_ITER, MEMBERSHIP_TOL};
use crate::vecops::{dist_sq, dot, norm, norm_sq};

/// Closed convex subsets of R^d with nonempty interior.
///
/// `Halfspace { normal, offset }` is the set `{x : ⟨normal, x⟩ ≥ offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Intersection { sets: Vec<ConvexSet> },
}

impl ConvexSet {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, MonotoneError> {
        let s = ConvexSet::Halfspace { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, MonotoneError> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, MonotoneError> {
        let s = ConvexSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn intersection(sets: Vec<ConvexSet>) -> Result<Self, MonotoneError> {
        let s = ConvexSet::Intersection { sets };
        s.validate()?;
        Ok(s)
    }

    /// Nonnegative half-line / orthant coordinate `{x : x_axis ≥ 0}` in R^dim.
    pub fn nonnegative(dim: usize, axis: usize) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        ConvexSet::Halfspace { normal, offset: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { normal, .. } => normal.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Intersection { sets } => sets.first().map_or(0, ConvexSet::dim),
        }
    }

    /// Checks shape parameters and that the interior is nonempty.
    pub fn validate(&self) -> Result<(), MonotoneError> {
        let bad = |m: &str| Err(MonotoneError::InvalidInput(m.to_string()));
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                if normal.is_empty() {
                    return bad("halfspace normal is empty");
                }
                if !normal.iter().chain(std::iter::once(offset)).all(|v| v.is_finite()) {
                    return bad("halfspace parameters must be finite");
                }
                if norm(normal) == 0.0 {
                    return bad("halfspace normal must be nonzero");
                }
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() {
                    return bad("ball center is empty");
                }
                if !center.iter().all(|v| v.is_finite()) || !radius.is_finite() {
                    return bad("ball parameters must be finite");
                }
                if *radius <= 0.0 {
                    return bad("ball radius must be positive (nonempty interior)");
                }
            }
            ConvexSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box bounds must be nonempty and of equal length");
                }
                if !lo.iter().chain(hi).all(|v| v.is_finite()) {
                    return bad("box bounds must be finite");
                }
                if lo.iter().zip(hi).any(|(l, h)| l >= h) {
                    return bad("box requires lo < hi in every coordinate (nonempty interior)");
                }
            }
            ConvexSet::Intersection { sets } => {
                if sets.is_empty() {
                    return bad("intersection of zero sets");
                }
                let d = sets[0].dim();
                for s in sets {
                    s.validate()?;
                    if s.dim() != d {
                        return bad("intersection members have different dimensions");
                    }
                }
                self.check_interior()?;
            }
        }
        Ok(())
    }

    /// Distance-like violation: zero inside, positive outside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                ((offset - dot(normal, x)) / norm(normal)).max(0.0)
            }
            ConvexSet::Ball { center, radius } => (dist_sq(x, center).sqrt() - radius).max(0.0),
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
                .fold(0.0, f64::max),
            ConvexSet::Intersection { sets } => {
                sets.iter().map(|s| s.violation(x)).fold(0.0, f64::max)
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Whether `x` lies in the interior with margin `tol`.
    pub fn contains_interior(&self, x: &[f64], tol: f64) -> bool {
        match self.shrunk(tol) {
            Some(s) => s.contains(x, 0.0),
            None => false,
        }
    }

    /// Metric projection onto the set.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, MonotoneError> {
        if y.len() != self.dim() {
            return Err(MonotoneError::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(MonotoneError::InvalidInput("non-finite point".into()));
        }
        let mut out = y.to_vec();
        self.project_into(&mut out)?;
        Ok(out)
    }

    /// In-place projection; the hot path of the solver.
    pub fn project_into(&self, x: &mut [f64]) -> Result<(), MonotoneError> {
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                let gap = offset - dot(normal, x);
                if gap > 0.0 {
                    let scale = gap / norm_sq(normal);
                    for (xi, ni) in x.iter_mut().zip(normal) {
                        *xi += scale * ni;
                    }
                }
                Ok(())
            }
            ConvexSet::Ball { center, radius } => {
                let r = dist_sq(x, center).sqrt();
                if r > *radius {
                    let s = radius / r;
                    for (xi, ci) in x.iter_mut().zip(center) {
                        *xi = ci + s * (*xi - ci);
                    }
                }
                Ok(())
            }
            ConvexSet::Box { lo, hi } => {
                for (xi, (l, h)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                    *xi = xi.clamp(*l, *h);
                }
                Ok(())
            }
            ConvexSet::Intersection { sets } => dykstra(sets, x),
        }
    }

    /// The set pulled inward by `r`, or `None` if that empties a member.
    fn shrunk(&self, r: f64) -> Option<ConvexSet> {
        Some(match self {
            ConvexSet::Halfspace { normal, offset } => ConvexSet::Halfspace {
                normal: normal.clone(),
                offset: offset + r * norm(normal),
            },
            ConvexSet::Ball { center, radius } => {
                if *radius <= r {
                    return None;
                }
                ConvexSet::Ball { center: center.clone(), radius: radius - r }
            }
            ConvexSet::Box { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| h - l <= 2.0 * r) {
                    return None;
                }
                ConvexSet::Box {
                    lo: lo.iter().map(|l| l + r).collect(),
                    hi: hi.iter().map(|h| h - r).collect(),
                }
            }
            ConvexSet::Intersection { sets } => ConvexSet::Intersection {
                sets: sets.iter().map(|s| s.shrunk(r)).collect::<Option<Vec<_>>>()?,
            },
        })
    }

    fn anchor(&self) -> Vec<f64> {
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                let s = offset / norm_sq(normal);
                normal.iter().map(|n| n * s).collect()
            }
            ConvexSet::Ball { center, .. } => center.clone(),
            ConvexSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            ConvexSet::Intersection { sets } => {
                let d = self.dim();
                let mut acc = vec![0.0; d];
                for s in sets {
                    for (a, v) in acc.iter_mut().zip(s.anchor()) {
                        *a += v / sets.len() as f64;
                    }
                }
                acc
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            ConvexSet::Halfspace { offset, normal } => 1.0 + (offset / norm(normal)).abs(),
            ConvexSet::Ball { center, radius } => radius + norm(center),
            ConvexSet::Box { lo, hi } => lo.iter().chain(hi).fold(1.0, |m, v| m.max(v.abs())),
            ConvexSet::Intersection { sets } => sets.iter().map(|s| s.scale()).fold(1.0, f64::max),
        }
    }

    /// Nonempty interior of an intersection: the intersection pulled inward
    /// by a small margin must still be feasible.
    fn check_interior(&self) -> Result<(), MonotoneError> {
        let margin = 1e-8 * self.scale();
        let inner = self.shrunk(margin).ok_or_else(|| {
            MonotoneError::Infeasible("intersection has empty interior".into())
        })?;
        let mut p = self.anchor();
        match &inner {
            ConvexSet::Intersection { sets } => dykstra(sets, &mut p).map_err(|e| match e {
                MonotoneError::Convergence { .. } | MonotoneError::Infeasible(_) => {
                    MonotoneError::Infeasible("intersection has empty interior".into())
                }
                other => other,
            }),
            _ => Ok(()),
        }
    }
}

/// Dykstra's alternating projections onto `∩ sets`, in place.
fn dykstra(sets: &[ConvexSet], x: &mut [f64]) -> Result<(), MonotoneError> {
    let d = x.len();
    if sets.len() == 1 {
        return sets[0].project_into(x);
    }
    let mut incr = vec![0.0; sets.len() * d];
    let mut z = vec![0.0; d];
    for iter in 0..DYKSTRA_MAX_ITER {
        let mut change = 0.0f64;
        for (i, s) in sets.iter().enumerate() {
            let p = &mut incr[i * d..(i + 1) * d];
            for k in 0..d {
                z[k] = x[k] + p[k];
            }
            let before: Vec<f64> = x.to_vec();
            x.copy_from_slice(&z);
            s.project_into(x)?;
            for k in 0..d {
                p[k] = z[k] - x[k];
            }
            change = change.max(dist_sq(&before, x).sqrt());
        }
        let feasible = sets.iter().all(|s| s.contains(x, MEMBERSHIP_TOL));
        if change <= MEMBERSHIP_TOL && feasible {
            return Ok(());
        }
        if iter + 1 == DYKSTRA_MAX_ITER {
            let worst = sets.iter().map(|s| s.violation(x)).fold(0.0, f64::max);
            if worst > 1e-6 {
                return Err(MonotoneError::Infeasible(format!(
                    "intersection appears empty (residual violation {worst:.3e})"
                )));
            }
        }
    }
    Err(MonotoneError::Convergence { iterations: DYKSTRA_MAX_ITER })
}
