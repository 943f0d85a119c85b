use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::calculus::{Generator, GeneratorOptions, LyapunovFunction};
use crate::coefficients::CoefficientSet;
use crate::measure::EmpiricalMeasure;
use crate::solver::Snapshot;
use crate::vecops::{dot, norm, norm_sq};

/// `γ(r) = c rᵖ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub c: f64,
    pub p: f64,
}

impl Gamma {
    pub fn eval(&self, r: f64) -> f64 {
        self.c * r.powf(self.p)
    }
}

/// Which family of Lyapunov conditions to audit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LyapunovBounds {
    /// `∫(𝕃V + αV + ∂_sV) dμ ≤ 0`, `a₁∫|x|² ≤ ∫V ≤ a₂∫|x|²`.
    Exponential { a1: f64, a2: f64 },
    /// `∫(𝕃V + αV + ∂_sV) dμ ≤ N₁`, `a₁∫|x|² − N₂ ≤ ∫V ≤ a₂∫|x|² + N₃`.
    Ultimate { a1: f64, a2: f64, n1: f64, n2: f64, n3: f64 },
    /// `𝕃V + αV + ∂_sV ≤ 0` at every particle, `γ₁(|x|) ≤ V ≤ γ₂(|x|)`.
    Pointwise { gamma1: Gamma, gamma2: Gamma },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditForm {
    Integrated,
    Pointwise,
}

/// Margins are `bound − observed`; a condition holds when its margin is
/// at least `-tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovAudit {
    pub function: String,
    pub form: AuditForm,
    pub samples: usize,
    pub generator_margin: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    /// Smallest `⟨∂_xV, ΔK⟩ + Ê⟨∂_μV(x)(X), ΔK⟩` seen, if a trajectory was given.
    pub k_pairing_min: Option<f64>,
    pub tolerance: f64,
}

impl LyapunovAudit {
    pub fn generator_ok(&self) -> bool {
        self.generator_margin >= -self.tolerance
    }

    pub fn sandwich_ok(&self) -> bool {
        self.lower_margin >= -self.tolerance && self.upper_margin >= -self.tolerance
    }

    pub fn k_pairing_ok(&self) -> bool {
        self.k_pairing_min.map_or(true, |m| m >= -self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.generator_ok() && self.sandwich_ok() && self.k_pairing_ok()
    }
}

/// Audits `v` against `bounds` on each snapshot's empirical measure.
///
/// Each snapshot is taken at its own time. When `with_k_pairing` is set
/// the snapshot increments `ΔK` are paired with the gradients at the
/// post-step state.
pub fn audit_lyapunov_conditions(
    v: &dyn LyapunovFunction,
    c: &CoefficientSet,
    alpha: f64,
    bounds: &LyapunovBounds,
    snapshots: &[Snapshot],
    opts: &GeneratorOptions,
    with_k_pairing: bool,
) -> Result<LyapunovAudit, StabilityError> {
    if snapshots.is_empty() {
        return Err(StabilityError::InvalidInput("no measures to audit".into()));
    }
    if !(alpha > 0.0) {
        return Err(StabilityError::InvalidInput(format!("α must be positive, got {alpha}")));
    }
    let form = match bounds {
        LyapunovBounds::Pointwise { .. } => AuditForm::Pointwise,
        _ => AuditForm::Integrated,
    };
    let mut audit = LyapunovAudit {
        function: v.name(),
        form,
        samples: snapshots.len(),
        generator_margin: f64::INFINITY,
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        k_pairing_min: None,
        tolerance: 1e-10,
    };
    for (k, snap) in snapshots.iter().enumerate() {
        let (t, mu) = (snap.time, &snap.measure);
        let gen = Generator::new(c, v, opts, k as u64)?;
        let full = gen.ensemble(t, mu)?.full;
        let vals: Vec<f64> = mu.points().map(|x| v.value(t, x, mu)).collect();
        let n = mu.len() as f64;
        let drift: Vec<f64> = full.iter().zip(&vals).map(|(g, v)| g + alpha * v).collect();
        match *bounds {
            LyapunovBounds::Exponential { a1, a2 } => {
                integrated(&mut audit, &drift, &vals, mu, n, 0.0, a1, a2, 0.0, 0.0);
            }
            LyapunovBounds::Ultimate { a1, a2, n1, n2, n3 } => {
                integrated(&mut audit, &drift, &vals, mu, n, n1, a1, a2, n2, n3);
            }
            LyapunovBounds::Pointwise { gamma1, gamma2 } => {
                for ((g, val), x) in drift.iter().zip(&vals).zip(mu.points()) {
                    let r = norm(x);
                    audit.generator_margin = audit.generator_margin.min(-g);
                    audit.lower_margin = audit.lower_margin.min(val - gamma1.eval(r));
                    audit.upper_margin = audit.upper_margin.min(gamma2.eval(r) - val);
                }
            }
        }
        if with_k_pairing {
            let m = k_pairing(v, t, mu, &snap.dk)?;
            audit.k_pairing_min = Some(audit.k_pairing_min.map_or(m, |p: f64| p.min(m)));
        }
    }
    Ok(audit)
}

#[allow(clippy::too_many_arguments)]
fn integrated(
    audit: &mut LyapunovAudit,
    drift: &[f64],
    vals: &[f64],
    mu: &EmpiricalMeasure,
    n: f64,
    n1: f64,
    a1: f64,
    a2: f64,
    n2: f64,
    n3: f64,
) {
    let g = drift.iter().sum::<f64>() / n;
    let ev = vals.iter().sum::<f64>() / n;
    let m2 = mu.points().map(norm_sq).sum::<f64>() / n;
    audit.generator_margin = audit.generator_margin.min(n1 - g);
    audit.lower_margin = audit.lower_margin.min(ev - (a1 * m2 - n2));
    audit.upper_margin = audit.upper_margin.min(a2 * m2 + n3 - ev);
}

/// `min_i ⟨∂_xV(X^i), ΔK^i⟩ + Ê_l⟨∂_μV(X^i)(X^l), ΔK^l⟩`.
fn k_pairing(v: &dyn LyapunovFunction, t: f64, mu: &EmpiricalMeasure, dk: &[f64]) -> Result<f64, StabilityError> {
    let d = mu.dim();
    let n = mu.len();
    let mut gx = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut worst = f64::INFINITY;
    let shared = if v.dmu_independent_of_x() {
        let mut acc = 0.0;
        for l in 0..n {
            v.dmu(t, mu.point(0), mu, mu.point(l), &mut gm)?;
            acc += dot(&gm, &dk[l * d..(l + 1) * d]);
        }
        Some(acc / n as f64)
    } else {
        None
    };
    for i in 0..n {
        let x = mu.point(i);
        v.dx(t, x, mu, &mut gx)?;
        let mut p = dot(&gx, &dk[i * d..(i + 1) * d]);
        p += match shared {
            Some(s) => s,
            None => {
                let mut acc = 0.0;
                for l in 0..n {
                    v.dmu(t, x, mu, mu.point(l), &mut gm)?;
                    acc += dot(&gm, &dk[l * d..(l + 1) * d]);
                }
                acc / n as f64
            }
        };
        worst = worst.min(p);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::calculus::TestFunction;
    use crate::coefficients::Catalog;
    use crate::monotone::{ConvexSet, MonotoneOperator};
    use crate::solver::{simulate, InitialCondition, SolverConfig};

    fn ou(a: f64, sigma: f64) -> CoefficientSet {
        let cat = Catalog::LinearMeanField {
            dim: 1,
            a,
            c: 0.0,
            sigma,
            gamma: 0.0,
            modulation: Default::default(),
        };
        CoefficientSet::new(Arc::new(cat), None)
    }

    fn snaps(points: &[f64]) -> Vec<Snapshot> {
        let mu = EmpiricalMeasure::new(1, points.to_vec()).unwrap();
        vec![Snapshot { time: 0.0, measure: mu, dk: vec![0.0; points.len()] }]
    }

    #[test]
    fn quadratic_exponential_form_is_tight() {
        let a = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &ou(1.0, 0.0),
            2.0,
            &LyapunovBounds::Exponential { a1: 1.0, a2: 1.0 },
            &snaps(&[-1.5, 0.2, 3.0]),
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert_eq!(a.form, AuditForm::Integrated);
        assert!(a.generator_margin.abs() < 1e-12);
        assert!(a.passed());
    }

    #[test]
    fn too_large_rate_fails() {
        let a = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &ou(1.0, 0.0),
            3.0,
            &LyapunovBounds::Exponential { a1: 1.0, a2: 1.0 },
            &snaps(&[1.0, 2.0]),
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert!(!a.generator_ok());
    }

    #[test]
    fn noise_needs_ultimate_form() {
        let c = ou(1.0, 1.0);
        let s = snaps(&[0.0, 0.5]);
        let exp = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &c,
            2.0,
            &LyapunovBounds::Exponential { a1: 1.0, a2: 1.0 },
            &s,
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert!(!exp.generator_ok());
        let ult = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &c,
            2.0,
            &LyapunovBounds::Ultimate { a1: 1.0, a2: 1.0, n1: 1.0, n2: 0.0, n3: 0.0 },
            &s,
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert!(ult.passed());
    }

    #[test]
    fn pointwise_form_and_sandwich() {
        let a = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &ou(1.0, 0.0),
            1.0,
            &LyapunovBounds::Pointwise { gamma1: Gamma { c: 0.5, p: 2.0 }, gamma2: Gamma { c: 1.0, p: 2.0 } },
            &snaps(&[-2.0, 1.0]),
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert_eq!(a.form, AuditForm::Pointwise);
        assert!(a.passed());
        let bad = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &ou(1.0, 0.0),
            1.0,
            &LyapunovBounds::Pointwise { gamma1: Gamma { c: 2.0, p: 2.0 }, gamma2: Gamma { c: 3.0, p: 2.0 } },
            &snaps(&[-2.0, 1.0]),
            &GeneratorOptions::default(),
            false,
        )
        .unwrap();
        assert!(!bad.sandwich_ok());
    }

    #[test]
    fn missing_derivative_surfaces() {
        struct Bare;
        impl LyapunovFunction for Bare {
            fn name(&self) -> String {
                "bare".into()
            }
            fn value(&self, _: f64, x: &[f64], _: &EmpiricalMeasure) -> f64 {
                x[0] * x[0]
            }
        }
        let r = audit_lyapunov_conditions(
            &Bare,
            &ou(1.0, 0.0),
            1.0,
            &LyapunovBounds::Exponential { a1: 1.0, a2: 1.0 },
            &snaps(&[1.0]),
            &GeneratorOptions::default(),
            false,
        );
        assert!(matches!(r, Err(StabilityError::Calculus(_))));
    }

    #[test]
    fn reflected_paths_pair_nonnegatively() {
        let mut cfg = SolverConfig::new(200, 0.01, 0.5, InitialCondition::Constant { value: vec![0.0] });
        cfg.retain_snapshots = true;
        let c = ou(0.0, 1.0);
        let op = MonotoneOperator::normal_cone(ConvexSet::nonnegative(1, 0)).unwrap();
        let traj = simulate(&cfg, &c, &op).unwrap();
        let a = audit_lyapunov_conditions(
            &TestFunction::Quadratic,
            &c,
            1.0,
            &LyapunovBounds::Ultimate { a1: 1.0, a2: 1.0, n1: 10.0, n2: 0.0, n3: 0.0 },
            &traj.snapshots,
            &GeneratorOptions::default(),
            true,
        )
        .unwrap();
        assert!(a.k_pairing_ok(), "{:?}", a.k_pairing_min);
    }
}
