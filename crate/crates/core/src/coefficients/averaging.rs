use serde::Serialize;

use super::{sample_measure, CoefficientError, CoefficientSet, Coefficients, MEASURE_POINTS};
use crate::measure::{coupled_rms_distance, EmpiricalMeasure};
use crate::noise::{stream_rng, JumpLaw, PointSource, Purpose};
use crate::vecops::{all_finite, dist_sq, norm_sq};

/// Marks per time node in the jump-defect estimate.
const DEFECT_MARKS: usize = 1000;

/// Time-averaged defects of `(b, σ, f)` against an averaged triple, each
/// already divided by `1 + |x|² + ‖μ‖₂²`.
///
/// `psi3` is further divided by the sample mean of `‖u‖²` over the marks
/// used, so it is directly comparable to the `‖u‖²`-weighted condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AveragingDefect {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
}

/// Composite-trapezoid estimates of
/// `(1/T₁)∫₀^{T₁} |b(s,x,μ) − b̄(x,μ)|² ds` and the matching σ and f terms.
pub fn time_average_defect(
    full: &dyn Coefficients,
    avg: &dyn Coefficients,
    jump_law: Option<&JumpLaw>,
    x: &[f64],
    mu: &EmpiricalMeasure,
    t1: f64,
    n_quad: usize,
) -> Result<AveragingDefect, CoefficientError> {
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(CoefficientError::InvalidInput(format!("T1 must be positive, got {t1}")));
    }
    if n_quad < 2 {
        return Err(CoefficientError::InvalidInput(format!("need at least 2 quadrature steps, got {n_quad}")));
    }
    let d = full.dim();
    let m = full.noise_dim();
    if avg.dim() != d || avg.noise_dim() != m || x.len() != d || mu.dim() != d {
        return Err(CoefficientError::InvalidInput("dimension mismatch between coefficients, point and measure".into()));
    }

    let marks: Vec<Vec<f64>> = match jump_law {
        Some(law) => {
            let mut rng = stream_rng(0, Purpose::Audit, 3);
            (0..DEFECT_MARKS).map(|_| law.sample_mark(&mut rng)).collect()
        }
        None => Vec::new(),
    };
    let mark_ms = if marks.is_empty() {
        0.0
    } else {
        marks.iter().map(|u| norm_sq(u)).sum::<f64>() / marks.len() as f64
    };

    let (mut b, mut bb) = (vec![0.0; d], vec![0.0; d]);
    let (mut s, mut sb) = (vec![0.0; d * m], vec![0.0; d * m]);
    let (mut f, mut fb) = (vec![0.0; d], vec![0.0; d]);
    avg.drift(0.0, x, mu, &mut bb);
    avg.diffusion(0.0, x, mu, &mut sb);
    check(&bb, "averaged drift", 0.0)?;
    check(&sb, "averaged diffusion", 0.0)?;
    let fbar: Vec<Vec<f64>> = marks
        .iter()
        .map(|u| {
            avg.jump(0.0, x, mu, u, &mut fb);
            check(&fb, "averaged jump coefficient", 0.0).map(|_| fb.clone())
        })
        .collect::<Result<_, _>>()?;

    let hstep = t1 / n_quad as f64;
    let mut acc = [0.0f64; 3];
    for k in 0..=n_quad {
        let t = k as f64 * hstep;
        let w = if k == 0 || k == n_quad { 0.5 } else { 1.0 };
        full.drift(t, x, mu, &mut b);
        full.diffusion(t, x, mu, &mut s);
        check(&b, "drift", t)?;
        check(&s, "diffusion", t)?;
        acc[0] += w * dist_sq(&b, &bb);
        acc[1] += w * dist_sq(&s, &sb);
        if !marks.is_empty() {
            let mut e = 0.0;
            for (u, fb) in marks.iter().zip(&fbar) {
                full.jump(t, x, mu, u, &mut f);
                check(&f, "jump coefficient", t)?;
                e += dist_sq(&f, fb);
            }
            acc[2] += w * e / marks.len() as f64;
        }
    }
    let scale = 1.0 + norm_sq(x) + mu.second_moment();
    let avg_of = |a: f64| a * hstep / t1 / scale;
    Ok(AveragingDefect {
        psi1: avg_of(acc[0]),
        psi2: avg_of(acc[1]),
        psi3: if mark_ms > 0.0 { avg_of(acc[2]) / mark_ms } else { 0.0 },
    })
}

fn check(v: &[f64], what: &'static str, t: f64) -> Result<(), CoefficientError> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(CoefficientError::NonFinite { what, t })
    }
}

/// Empirical continuity and growth constants of an averaged triple.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InheritedBoundsReport {
    pub samples: usize,
    /// Smallest `M` with `|Δb̄|² + ‖Δσ̄‖² ≤ M κ(β|x−y|² + ρ²)` over the sample.
    pub continuity_m: f64,
    /// Smallest `M` with `|Δf̄|² ≤ M ‖u‖² φ(β|x−y|² + ρ²)` over the sample.
    pub jump_continuity_m: f64,
    /// Largest `(|b̄|² + ‖σ̄‖²) / (1 + |x|² + ‖μ‖₂²)` seen.
    pub growth_ratio: f64,
    /// Largest `|f̄|² / (‖u‖²(1 + |x|² + ‖μ‖₂²))` seen.
    pub jump_growth_ratio: f64,
    /// Level the growth ratios are compared against.
    pub growth_limit: f64,
    /// Samples whose growth ratio exceeded `growth_limit`.
    pub growth_flags: usize,
}

/// Samples `(x, y, μ, ν)` and fits the constants that the averaged
/// coefficients inherit from the originals.
///
/// `ρ(μ, ν)` is replaced by the index-coupled RMS distance of the sampled
/// measures, which bounds it from above, so `continuity_m` is a lower
/// estimate of the true constant. The growth limit is `2 L₂`, the value the
/// inherited bound takes once the averaging defects have vanished.
pub fn audit_inherited_bounds(
    avg: &dyn Coefficients,
    c: &CoefficientSet,
    sampler: &mut dyn PointSource,
    n: usize,
) -> InheritedBoundsReport {
    let d = avg.dim();
    let m = avg.noise_dim();
    let growth_limit = 2.0 * c.l2;
    let mut report = InheritedBoundsReport {
        samples: n,
        continuity_m: 0.0,
        jump_continuity_m: 0.0,
        growth_ratio: 0.0,
        jump_growth_ratio: 0.0,
        growth_limit,
        growth_flags: 0,
    };
    let mut mark_rng = stream_rng(0, Purpose::Audit, 5);
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; d * m], vec![0.0; d * m]);
    let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..n {
        let x = sampler.sample();
        let y = sampler.sample();
        let mu = sample_measure(sampler, d, MEASURE_POINTS);
        let nu = sample_measure(sampler, d, MEASURE_POINTS);
        let rho = coupled_rms_distance(&mu, &nu).unwrap_or(0.0);
        let arg = c.beta * dist_sq(&x, &y) + rho * rho;

        avg.drift(0.0, &x, &mu, &mut bx);
        avg.drift(0.0, &y, &nu, &mut by);
        avg.diffusion(0.0, &x, &mu, &mut sx);
        avg.diffusion(0.0, &y, &nu, &mut sy);
        let lhs = dist_sq(&bx, &by) + dist_sq(&sx, &sy);
        let k = c.kappa.eval_unchecked(arg);
        if k > 0.0 {
            report.continuity_m = report.continuity_m.max(lhs / k);
        }
        let scale = 1.0 + norm_sq(&x) + mu.second_moment();
        let g = (norm_sq(&bx) + norm_sq(&sx)) / scale;
        report.growth_ratio = report.growth_ratio.max(g);
        let mut flagged = !(g <= growth_limit);

        if let Some(law) = &c.jump_law {
            let u = law.sample_mark(&mut mark_rng);
            let uu = norm_sq(&u);
            if uu > 0.0 {
                avg.jump(0.0, &x, &mu, &u, &mut fx);
                avg.jump(0.0, &y, &nu, &u, &mut fy);
                let p = c.phi.eval_unchecked(arg);
                if p > 0.0 {
                    report.jump_continuity_m = report.jump_continuity_m.max(dist_sq(&fx, &fy) / (uu * p));
                }
                let gj = norm_sq(&fx) / (uu * scale);
                report.jump_growth_ratio = report.jump_growth_ratio.max(gj);
                flagged |= !(gj <= growth_limit);
            }
        }
        if flagged {
            report.growth_flags += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Catalog, Modulation, Modulus};
    use crate::noise::{GaussianSource, MarkLaw};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn lmf(a: f64, c: f64, sigma: f64, gamma: f64, modulation: Modulation) -> Catalog {
        Catalog::LinearMeanField { dim: 1, a, c, sigma, gamma, modulation }
    }

    #[test]
    fn sin2_defect_is_one_sixteenth() {
        let full = lmf(1.0, 0.0, 0.0, 0.0, Modulation::Sin2);
        let avg = lmf(1.0, 0.0, 0.0, 0.0, Modulation::Half);
        let mu = EmpiricalMeasure::new(1, vec![0.0]).unwrap();
        let d = time_average_defect(&full, &avg, None, &[1.0], &mu, 2.0 * PI, 10_000).unwrap();
        assert!((d.psi1 - 1.0 / 16.0).abs() < 1e-6, "{}", d.psi1);
        assert_eq!(d.psi2, 0.0);
        assert_eq!(d.psi3, 0.0);
    }

    #[test]
    fn autonomous_defect_vanishes() {
        let law = JumpLaw::new(1.0, 1.0, 1, MarkLaw::UniformBall).unwrap();
        let c = lmf(1.0, 0.5, 0.3, 0.1, Modulation::None);
        let mu = EmpiricalMeasure::new(1, vec![0.5, -1.0]).unwrap();
        let d = time_average_defect(&c, &c, Some(&law), &[0.7], &mu, 3.0, 50).unwrap();
        assert_eq!(d, AveragingDefect { psi1: 0.0, psi2: 0.0, psi3: 0.0 });
    }

    #[test]
    fn defect_nonincreasing_over_periods() {
        let full = lmf(1.0, 0.0, 0.0, 0.0, Modulation::Sin2);
        let avg = lmf(1.0, 0.0, 0.0, 0.0, Modulation::Half);
        let mu = EmpiricalMeasure::new(1, vec![0.0]).unwrap();
        let vals: Vec<f64> = [2.0 * PI, 20.0 * PI, 200.0 * PI]
            .iter()
            .map(|&t| time_average_defect(&full, &avg, None, &[1.0], &mu, t, 20_000).unwrap().psi1)
            .collect();
        assert!(vals[1] <= vals[0] + 1e-9 && vals[2] <= vals[1] + 1e-9, "{vals:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = Catalog::Zero { dim: 1 };
        let mu = EmpiricalMeasure::new(1, vec![0.0]).unwrap();
        assert!(time_average_defect(&c, &c, None, &[0.0], &mu, 0.0, 10).is_err());
        assert!(time_average_defect(&c, &c, None, &[0.0], &mu, 1.0, 1).is_err());
    }

    fn set_for(entry: Catalog) -> CoefficientSet {
        let mut s = CoefficientSet::new(Arc::new(entry), None);
        s.kappa = Modulus::Linear { l: 1.0 };
        s.beta = 1.0;
        s
    }

    #[test]
    fn inherited_bounds_zero() {
        let c = set_for(Catalog::Zero { dim: 2 });
        let r = audit_inherited_bounds(&Catalog::Zero { dim: 2 }, &c, &mut GaussianSource::new(2, 1.0, 1), 200);
        assert_eq!(r.continuity_m, 0.0);
        assert_eq!(r.growth_flags, 0);
    }

    #[test]
    fn inherited_bounds_linear() {
        let avg = lmf(1.0, 0.0, 0.0, 0.0, Modulation::None);
        let c = set_for(avg.clone());
        let r = audit_inherited_bounds(&avg, &c, &mut GaussianSource::new(1, 1.0, 2), 10_000);
        assert!(r.continuity_m <= 1.0 + 1e-9, "{}", r.continuity_m);
        assert!(r.continuity_m > 0.5);
        assert_eq!(r.growth_flags, 0);
    }

    #[test]
    fn inherited_bounds_flag_cubic_growth() {
        let avg = Catalog::Cubic { dim: 1, a: 1.0, sigma: 0.0 };
        let c = set_for(lmf(1.0, 0.0, 0.0, 0.0, Modulation::None));
        let r = audit_inherited_bounds(&avg, &c, &mut GaussianSource::new(1, 3.0, 3), 1000);
        assert!(r.growth_flags > 0);
    }
}
