use serde::{Deserialize, Serialize};

use super::{CalculusError, LyapunovFunction};
use crate::measure::EmpiricalMeasure;
use crate::vecops::norm_sq;

/// Built-in test and Lyapunov functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TestFunction {
    /// `h ≡ c`.
    Constant { c: f64 },
    /// `|x|²`.
    Quadratic,
    /// `|x|² + ∫|y|² μ(dy)`.
    MeasureQuadratic,
    /// `e^{αt} |x|²`.
    ExpWeighted { alpha: f64 },
    /// `|∫y μ(dy)|²`.
    MeanSquare,
    /// Sum of the listed functions.
    Sum { terms: Vec<TestFunction> },
}

impl TestFunction {
    pub const NAMES: [&'static str; 6] =
        ["constant", "quadratic", "measure_quadratic", "exp_weighted", "mean_square", "sum"];

    fn scale(&self, t: f64) -> f64 {
        match self {
            TestFunction::ExpWeighted { alpha } => (alpha * t).exp(),
            _ => 1.0,
        }
    }

    fn diag(out: &mut [f64], v: f64) {
        let d = (out.len() as f64).sqrt() as usize;
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = v;
        }
    }
}

impl LyapunovFunction for TestFunction {
    fn name(&self) -> String {
        match self {
            TestFunction::Constant { .. } => "constant".into(),
            TestFunction::Quadratic => "quadratic".into(),
            TestFunction::MeasureQuadratic => "measure_quadratic".into(),
            TestFunction::ExpWeighted { .. } => "exp_weighted".into(),
            TestFunction::MeanSquare => "mean_square".into(),
            TestFunction::Sum { terms } => {
                terms.iter().map(|f| f.name()).collect::<Vec<_>>().join("+")
            }
        }
    }

    fn value(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> f64 {
        match self {
            TestFunction::Constant { c } => *c,
            TestFunction::Quadratic | TestFunction::ExpWeighted { .. } => self.scale(t) * norm_sq(x),
            TestFunction::MeasureQuadratic => norm_sq(x) + mu.second_moment(),
            TestFunction::MeanSquare => norm_sq(mu.mean()),
            TestFunction::Sum { terms } => terms.iter().map(|f| f.value(t, x, mu)).sum(),
        }
    }

    fn dt(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Result<f64, CalculusError> {
        Ok(match self {
            TestFunction::ExpWeighted { alpha } => alpha * self.scale(t) * norm_sq(x),
            TestFunction::Sum { terms } => {
                let mut s = 0.0;
                for f in terms {
                    s += f.dt(t, x, mu)?;
                }
                s
            }
            _ => 0.0,
        })
    }

    fn dx(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) -> Result<(), CalculusError> {
        match self {
            TestFunction::Constant { .. } | TestFunction::MeanSquare => out.fill(0.0),
            TestFunction::Quadratic | TestFunction::MeasureQuadratic | TestFunction::ExpWeighted { .. } => {
                let s = 2.0 * self.scale(t);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = s * v;
                }
            }
            TestFunction::Sum { terms } => sum_into(terms, out, |f, o| f.dx(t, x, mu, o))?,
        }
        Ok(())
    }

    fn dxx(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) -> Result<(), CalculusError> {
        match self {
            TestFunction::Constant { .. } | TestFunction::MeanSquare => out.fill(0.0),
            TestFunction::Quadratic | TestFunction::MeasureQuadratic | TestFunction::ExpWeighted { .. } => {
                Self::diag(out, 2.0 * self.scale(t))
            }
            TestFunction::Sum { terms } => sum_into(terms, out, |f, o| f.dxx(t, x, mu, o))?,
        }
        Ok(())
    }

    fn dmu(
        &self,
        t: f64,
        x: &[f64],
        mu: &EmpiricalMeasure,
        y: &[f64],
        out: &mut [f64],
    ) -> Result<(), CalculusError> {
        match self {
            TestFunction::MeasureQuadratic => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = 2.0 * v;
                }
            }
            TestFunction::MeanSquare => {
                for (o, m) in out.iter_mut().zip(mu.mean()) {
                    *o = 2.0 * m;
                }
            }
            TestFunction::Sum { terms } => sum_into(terms, out, |f, o| f.dmu(t, x, mu, y, o))?,
            _ => out.fill(0.0),
        }
        Ok(())
    }

    fn dy_dmu(
        &self,
        t: f64,
        x: &[f64],
        mu: &EmpiricalMeasure,
        y: &[f64],
        out: &mut [f64],
    ) -> Result<(), CalculusError> {
        match self {
            TestFunction::MeasureQuadratic => Self::diag(out, 2.0),
            TestFunction::Sum { terms } => sum_into(terms, out, |f, o| f.dy_dmu(t, x, mu, y, o))?,
            _ => out.fill(0.0),
        }
        Ok(())
    }

    fn dmu_independent_of_x(&self) -> bool {
        match self {
            TestFunction::Sum { terms } => terms.iter().all(|f| f.dmu_independent_of_x()),
            _ => true,
        }
    }
}

fn sum_into(
    terms: &[TestFunction],
    out: &mut [f64],
    mut eval: impl FnMut(&TestFunction, &mut [f64]) -> Result<(), CalculusError>,
) -> Result<(), CalculusError> {
    out.fill(0.0);
    let mut tmp = vec![0.0; out.len()];
    for f in terms {
        eval(f, &mut tmp)?;
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu() -> EmpiricalMeasure {
        EmpiricalMeasure::new(2, vec![0.3, -1.0, 1.2, 0.4, -0.7, 0.9]).unwrap()
    }

    fn catalog() -> Vec<TestFunction> {
        vec![
            TestFunction::Constant { c: 2.0 },
            TestFunction::Quadratic,
            TestFunction::MeasureQuadratic,
            TestFunction::ExpWeighted { alpha: 0.7 },
            TestFunction::MeanSquare,
            TestFunction::Sum { terms: vec![TestFunction::Quadratic, TestFunction::MeanSquare] },
        ]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = mu();
        let x = [0.8, -0.35];
        for h in catalog() {
            let mut g = [0.0; 2];
            h.dx(0.4, &x, &m, &mut g).unwrap();
            for j in 0..2 {
                let e = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[j] += e;
                xm[j] -= e;
                let fd = (h.value(0.4, &xp, &m) - h.value(0.4, &xm, &m)) / (2.0 * e);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{}: {fd} vs {}", h.name(), g[j]);
            }
        }
    }

    #[test]
    fn lions_derivative_matches_particle_gradient() {
        // For h(μ) evaluated on an empirical law, N ∂_{y_l} h = ∂_μ h(y_l).
        let m = mu();
        let x = [0.1, 0.2];
        for h in catalog() {
            let n = m.len() as f64;
            for l in 0..m.len() {
                let mut g = [0.0; 2];
                h.dmu(0.0, &x, &m, m.point(l), &mut g).unwrap();
                for j in 0..2 {
                    let e = 1e-6;
                    let shift = |s: f64| {
                        let mut p = m.as_flat().to_vec();
                        p[l * 2 + j] += s;
                        h.value(0.0, &x, &EmpiricalMeasure::new(2, p).unwrap())
                    };
                    let fd = n * (shift(e) - shift(-e)) / (2.0 * e);
                    assert!((fd - g[j]).abs() < 1e-5, "{}: {fd} vs {}", h.name(), g[j]);
                }
            }
        }
    }

    #[test]
    fn time_derivative_of_exp_weighted() {
        let h = TestFunction::ExpWeighted { alpha: 1.5 };
        let m = mu();
        let x = [1.0, 2.0];
        let e = 1e-6;
        let fd = (h.value(0.3 + e, &x, &m) - h.value(0.3 - e, &x, &m)) / (2.0 * e);
        assert!((fd - h.dt(0.3, &x, &m).unwrap()).abs() < 1e-6);
    }
}
