//! Stability diagnostics on simulated second-moment series and paths:
//! exponential decay fits, ultimate-boundedness envelopes, a tail-window
//! proxy for almost-sure convergence, and audits of Lyapunov conditions.

mod lyapunov;

pub use lyapunov::{audit_lyapunov_conditions, AuditForm, Gamma, LyapunovAudit, LyapunovBounds};

use serde::Serialize;

use crate::measure::EmpiricalMeasure;
use crate::solver::{ParticleEnsemble, StepObserver};
use crate::stats::MeanSe;
use crate::vecops::norm;

/// Monte Carlo slack, in standard errors, for envelope checks.
pub const ENVELOPE_SLACK_SE: f64 = 3.0;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Calculus(#[from] crate::calculus::CalculusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub c: f64,
    pub r2: f64,
    pub points: usize,
}

/// `[T/4, T]`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.25 * horizon, horizon)
}

/// Least-squares line through `(t, log q_t)` for `t` in `window`;
/// `alpha = −slope`, `c = exp(intercept) / E|ξ|²`.
pub fn fit_exponential_decay(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    xi_ms: f64,
) -> Result<DecayFit, StabilityError> {
    if times.len() != values.len() {
        return Err(StabilityError::InvalidInput("times and values differ in length".into()));
    }
    if !(xi_ms > 0.0) {
        return Err(StabilityError::InvalidInput(format!("E|ξ|² must be positive, got {xi_ms}")));
    }
    let tol = 1e-12 * window.1.abs().max(1.0);
    let mut pts = Vec::new();
    for (&t, &q) in times.iter().zip(values) {
        if t < window.0 - tol || t > window.1 + tol {
            continue;
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(StabilityError::InvalidInput(format!(
                "second moment {q} at t = {t} is not positive; paths may be absorbed at zero, shrink the window"
            )));
        }
        pts.push((t, q.ln()));
    }
    if pts.len() < 2 {
        return Err(StabilityError::InvalidInput("fewer than two points in the fit window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum::<f64>();
    let sty = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    if stt == 0.0 {
        return Err(StabilityError::InvalidInput("fit window contains a single time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>();
    let ss_tot = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { alpha: -slope, c: intercept.exp() / xi_ms, r2, points: pts.len() })
}

/// Outcome of an envelope check `q_t ≤ M e^{−λt} E|ξ|² + W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeVerdict {
    pub passed: bool,
    /// `min_t (envelope + slack·se − q_t)`.
    pub worst_margin: f64,
    pub worst_time: f64,
}

pub fn check_ultimate_boundedness(
    times: &[f64],
    series: &[MeanSe],
    m: f64,
    lambda: f64,
    w: f64,
    xi_ms: f64,
) -> Result<EnvelopeVerdict, StabilityError> {
    if !(m >= 0.0 && lambda >= 0.0 && w >= 0.0) {
        return Err(StabilityError::InvalidInput("M, λ and W must be nonnegative".into()));
    }
    if times.len() != series.len() {
        return Err(StabilityError::InvalidInput("times and series differ in length".into()));
    }
    let mut v = EnvelopeVerdict { passed: true, worst_margin: f64::INFINITY, worst_time: 0.0 };
    for (&t, q) in times.iter().zip(series) {
        let margin = m * (-lambda * t).exp() * xi_ms + w + ENVELOPE_SLACK_SE * q.se - q.mean;
        if margin < v.worst_margin {
            v.worst_margin = margin;
            v.worst_time = t;
        }
    }
    v.passed = v.worst_margin >= 0.0;
    Ok(v)
}

/// `q_t ≤ (a₂/a₁) e^{−αt} E|ξ|²`.
pub fn check_exponential_envelope(
    times: &[f64],
    series: &[MeanSe],
    ratio: f64,
    alpha: f64,
    xi_ms: f64,
) -> Result<EnvelopeVerdict, StabilityError> {
    check_ultimate_boundedness(times, series, ratio, alpha, 0.0, xi_ms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsVerdict {
    pub fraction: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Fraction of particles whose tail-window sup of `|X_t|` stays below
/// `delta`; passes when it reaches `1 − 3/√N`.
pub fn check_as_stability(tail_sup: &[f64], delta: f64) -> Result<AsVerdict, StabilityError> {
    if tail_sup.is_empty() {
        return Err(StabilityError::InvalidInput("no paths".into()));
    }
    let n = tail_sup.len() as f64;
    let inside = tail_sup.iter().filter(|&&s| s < delta).count() as f64;
    let fraction = inside / n;
    let threshold = 1.0 - 3.0 / n.sqrt();
    Ok(AsVerdict { fraction, threshold, passed: fraction >= threshold })
}

/// Tracks `max_{t ≥ t_tail} |X^i_t|` over grid times during a run.
pub struct TailSupObserver {
    pub t_tail: f64,
    pub sup: Vec<f64>,
}

impl TailSupObserver {
    pub fn new(t_tail: f64) -> Self {
        TailSupObserver { t_tail, sup: Vec::new() }
    }

    fn update(&mut self, ens: &ParticleEnsemble) {
        if ens.time() + 1e-12 >= self.t_tail {
            for (s, x) in self.sup.iter_mut().zip(ens.measure().points()) {
                *s = s.max(norm(x));
            }
        }
    }
}

impl StepObserver for TailSupObserver {
    fn start(&mut self, ens: &ParticleEnsemble) -> Result<(), String> {
        self.sup = vec![0.0; ens.len()];
        self.update(ens);
        Ok(())
    }

    fn after_step(&mut self, _prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String> {
        self.update(ens);
        Ok(())
    }
}

/// One row of a stability report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub parameters: String,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StabilityReport {
    pub fitted_alpha: Option<f64>,
    pub fitted_c: Option<f64>,
    pub fit_r2: Option<f64>,
    pub bound_w: Option<f64>,
    pub as_fraction: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl StabilityReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}
