use serde::{Deserialize, Serialize};

use super::CoefficientError;

/// Concave, nondecreasing modulus of continuity with `κ(0) = 0`.
///
/// The logarithmic kinds follow the classical non-Lipschitz examples on
/// `[0, δ]` and continue as their tangent line at `δ`, which keeps them
/// concave on all of `[0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// `L·u`.
    Linear { l: f64 },
    /// `u log(1/u)` on `[0, δ]`.
    LogSpliced { delta: f64 },
    /// `u log(1/u) log log(1/u)` on `[0, δ]`.
    LogLogSpliced { delta: f64 },
}

impl Modulus {
    pub fn validate(&self) -> Result<(), CoefficientError> {
        let bad = |msg: String| Err(CoefficientError::InvalidInput(msg));
        match *self {
            Modulus::Linear { l } => {
                if !(l.is_finite() && l > 0.0) {
                    return bad(format!("linear modulus needs L > 0, got {l}"));
                }
            }
            Modulus::LogSpliced { delta } | Modulus::LogLogSpliced { delta } => {
                if !(delta > 0.0 && delta < (-1.0f64).exp()) {
                    return bad(format!("splice point must lie in (0, 1/e), got {delta}"));
                }
                if let Modulus::LogLogSpliced { .. } = self {
                    let slope = self.splice_slope();
                    if slope < 0.0 {
                        return bad(format!(
                            "log-log modulus decreases past δ = {delta} (slope {slope:.4}); choose a smaller δ"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Left derivative at the splice point, the slope of the linear tail.
    fn splice_slope(&self) -> f64 {
        match *self {
            Modulus::Linear { l } => l,
            Modulus::LogSpliced { delta } => -delta.ln() - 1.0,
            Modulus::LogLogSpliced { delta } => {
                let l = -delta.ln();
                let ll = l.ln();
                l * ll - ll - 1.0
            }
        }
    }

    fn core(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        match *self {
            Modulus::Linear { l } => l * u,
            Modulus::LogSpliced { .. } => -u * u.ln(),
            Modulus::LogLogSpliced { .. } => {
                let l = -u.ln();
                u * l * l.ln()
            }
        }
    }

    /// `m(u)` for `u ≥ 0`.
    pub fn eval(&self, u: f64) -> Result<f64, CoefficientError> {
        if !(u >= 0.0) {
            return Err(CoefficientError::InvalidInput(format!("modulus argument must be ≥ 0, got {u}")));
        }
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: f64) -> f64 {
        match *self {
            Modulus::Linear { l } => l * u,
            Modulus::LogSpliced { delta } | Modulus::LogLogSpliced { delta } => {
                if u <= delta {
                    self.core(u)
                } else {
                    self.core(delta) + self.splice_slope() * (u - delta)
                }
            }
        }
    }
}

/// `m(u)`.
pub fn modulus_eval(m: &Modulus, u: f64) -> Result<f64, CoefficientError> {
    m.eval(u)
}
