use serde::{Deserialize, Serialize};

use super::{CalculusError, LyapunovFunction};
use crate::coefficients::CoefficientSet;
use crate::measure::EmpiricalMeasure;
use crate::noise::{stream_rng, Purpose};
use crate::quadrature::gauss_legendre_unit;
use crate::vecops::{dot, outer_self, trace_product};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    /// Monte Carlo marks for the `v(du)` integrals.
    pub jump_marks: usize,
    /// Gauss–Legendre nodes for the `η ∈ [0,1]` integral.
    pub eta_nodes: usize,
    /// Standard-form scale: the generator of `(εb, √ε σ, √ε f)`.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions { jump_marks: 32, eta_nodes: 8, epsilon: 1.0, seed: 0 }
    }
}

/// The six contributions to `𝕃h(t, x, μ)`, in the order
/// `⟨∂_x h, b⟩`, `½tr(σσ*∂²_x h)`, `∫⟨b, ∂_μ h⟩dμ`, `½∫tr(σσ*∂_y∂_μ h)dμ`,
/// the jump term on the measure argument, and the jump term on `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GeneratorTerms {
    pub drift: f64,
    pub diffusion: f64,
    pub measure_drift: f64,
    pub measure_diffusion: f64,
    pub measure_jump: f64,
    pub jump: f64,
}

impl GeneratorTerms {
    pub fn total(&self) -> f64 {
        self.drift + self.diffusion + self.measure_drift + self.measure_diffusion + self.measure_jump + self.jump
    }

    fn pointwise(&self) -> f64 {
        self.drift + self.diffusion + self.jump
    }

    fn measure(&self) -> f64 {
        self.measure_drift + self.measure_diffusion + self.measure_jump
    }
}

/// Evaluates `𝕃h` term by term. Measure integrals run over every particle
/// of `mu`; mark integrals average `jump_marks` draws.
pub fn generator_apply(
    c: &CoefficientSet,
    h: &dyn LyapunovFunction,
    t: f64,
    x: &[f64],
    mu: &EmpiricalMeasure,
    opts: &GeneratorOptions,
) -> Result<GeneratorTerms, CalculusError> {
    let g = Generator::new(c, h, opts, 0)?;
    if x.len() != c.dim() || mu.dim() != c.dim() {
        return Err(CalculusError::InvalidInput("point or measure has the wrong dimension".into()));
    }
    let mut terms = g.pointwise(t, x, mu)?;
    let mut m = GeneratorTerms::default();
    for y in mu.points() {
        let v = g.measure_integrand(t, x, mu, y)?;
        m.measure_drift += v.measure_drift;
        m.measure_diffusion += v.measure_diffusion;
        m.measure_jump += v.measure_jump;
    }
    let n = mu.len() as f64;
    terms.measure_drift = m.measure_drift / n;
    terms.measure_diffusion = m.measure_diffusion / n;
    terms.measure_jump = m.measure_jump / n;
    Ok(terms)
}

/// Reusable generator evaluator with a fixed set of marks.
pub(crate) struct Generator<'a> {
    c: &'a CoefficientSet,
    h: &'a dyn LyapunovFunction,
    eps: f64,
    rate: f64,
    marks: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Generator<'a> {
    pub(crate) fn new(
        c: &'a CoefficientSet,
        h: &'a dyn LyapunovFunction,
        opts: &GeneratorOptions,
        mark_stream: u64,
    ) -> Result<Self, CalculusError> {
        if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) {
            return Err(CalculusError::InvalidInput(format!("epsilon must be positive, got {}", opts.epsilon)));
        }
        if opts.eta_nodes == 0 {
            return Err(CalculusError::InvalidInput("need at least one η node".into()));
        }
        let (law, rate) = match &c.jump_law {
            Some(l) if c.has_jumps() => (Some(l), l.total_rate),
            _ => (None, 0.0),
        };
        if law.is_some() && opts.jump_marks == 0 {
            return Err(CalculusError::InvalidInput("jumps are active but jump_marks is 0".into()));
        }
        let marks = match law {
            Some(l) => {
                let mut rng = stream_rng(opts.seed, Purpose::GeneratorMarks, mark_stream);
                (0..opts.jump_marks).map(|_| l.sample_mark(&mut rng)).collect()
            }
            None => Vec::new(),
        };
        let (nodes, weights) = gauss_legendre_unit(opts.eta_nodes);
        Ok(Generator { c, h, eps: opts.epsilon, rate, marks, nodes, weights })
    }

    pub(crate) fn has_jumps(&self) -> bool {
        !self.marks.is_empty()
    }

    /// `(εσσ*)(t, x, μ)`.
    fn diffusion_matrix(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Vec<f64> {
        let d = self.c.dim();
        let m = self.c.noise_dim();
        let mut s = vec![0.0; d * m];
        self.c.model.diffusion(t, x, mu, &mut s);
        let mut a = vec![0.0; d * d];
        outer_self(&s, d, m, &mut a);
        a.iter_mut().for_each(|v| *v *= self.eps);
        a
    }

    /// `√ε f(t, x, μ, u)`.
    fn jump(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, u: &[f64], out: &mut [f64]) {
        self.c.model.jump(t, x, mu, u, out);
        let s = self.eps.sqrt();
        out.iter_mut().for_each(|v| *v *= s);
    }

    /// Terms that involve only `x`: drift, diffusion and the jump term on `x`.
    pub(crate) fn pointwise(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Result<GeneratorTerms, CalculusError> {
        let d = self.c.dim();
        let mut grad = vec![0.0; d];
        self.h.dx(t, x, mu, &mut grad)?;
        let mut hess = vec![0.0; d * d];
        self.h.dxx(t, x, mu, &mut hess)?;
        let mut b = vec![0.0; d];
        self.c.model.drift(t, x, mu, &mut b);
        let a = self.diffusion_matrix(t, x, mu);
        let mut terms = GeneratorTerms {
            drift: self.eps * dot(&grad, &b),
            diffusion: 0.5 * trace_product(&a, &hess, d),
            ..Default::default()
        };
        if self.has_jumps() {
            let h0 = self.h.value(t, x, mu);
            let mut f = vec![0.0; d];
            let mut xf = vec![0.0; d];
            let mut acc = 0.0;
            for u in &self.marks {
                self.jump(t, x, mu, u, &mut f);
                for j in 0..d {
                    xf[j] = x[j] + f[j];
                }
                acc += self.h.value(t, &xf, mu) - h0 - dot(&f, &grad);
            }
            terms.jump = self.rate * acc / self.marks.len() as f64;
        }
        Ok(terms)
    }

    /// Integrands of the three measure terms at `y`; their `μ(dy)` averages
    /// are the measure part of `𝕃h(t, x, μ)`.
    pub(crate) fn measure_integrand(
        &self,
        t: f64,
        x: &[f64],
        mu: &EmpiricalMeasure,
        y: &[f64],
    ) -> Result<GeneratorTerms, CalculusError> {
        let d = self.c.dim();
        let mut dm = vec![0.0; d];
        self.h.dmu(t, x, mu, y, &mut dm)?;
        let mut dydm = vec![0.0; d * d];
        self.h.dy_dmu(t, x, mu, y, &mut dydm)?;
        let mut b = vec![0.0; d];
        self.c.model.drift(t, y, mu, &mut b);
        let a = self.diffusion_matrix(t, y, mu);
        let mut terms = GeneratorTerms {
            measure_drift: self.eps * dot(&b, &dm),
            measure_diffusion: 0.5 * trace_product(&a, &dydm, d),
            ..Default::default()
        };
        if self.has_jumps() {
            let mut f = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut dz = vec![0.0; d];
            let mut acc = 0.0;
            for u in &self.marks {
                self.jump(t, y, mu, u, &mut f);
                for (eta, w) in self.nodes.iter().zip(&self.weights) {
                    for j in 0..d {
                        z[j] = y[j] + eta * f[j];
                    }
                    self.h.dmu(t, x, mu, &z, &mut dz)?;
                    acc += w * (dot(&dz, &f) - dot(&dm, &f));
                }
            }
            terms.measure_jump = self.rate * acc / self.marks.len() as f64;
        }
        Ok(terms)
    }

    /// `Σ_l` of the measure integrand at every particle, and `∂_t h + 𝕃h` at
    /// every particle. For `x`-dependent L-derivatives this is `O(N²)`.
    ///
    /// Returns `(full_i, attributed_l)`: `full_i` is `∂_t h + 𝕃h` at particle
    /// `i`; `attributed_l` is particle `l`'s share of the measure terms,
    /// averaged over the `x` argument, so `mean(full) = mean(pointwise) +
    /// mean(attributed)`.
    pub(crate) fn ensemble(&self, t: f64, mu: &EmpiricalMeasure) -> Result<EnsembleGenerator, CalculusError> {
        use rayon::prelude::*;
        let n = mu.len();
        let pointwise: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = mu.point(i);
                Ok(self.pointwise(t, x, mu)?.pointwise() + self.h.dt(t, x, mu)?)
            })
            .collect::<Result<_, CalculusError>>()?;
        let (per_x, attributed) = if self.h.dmu_independent_of_x() {
            let x0 = mu.point(0);
            let attributed: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|l| Ok(self.measure_integrand(t, x0, mu, mu.point(l))?.measure()))
                .collect::<Result<_, CalculusError>>()?;
            let m = attributed.iter().sum::<f64>() / n as f64;
            (vec![m; n], attributed)
        } else {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    mu.points()
                        .map(|y| Ok(self.measure_integrand(t, mu.point(i), mu, y)?.measure()))
                        .collect::<Result<Vec<f64>, CalculusError>>()
                })
                .collect::<Result<_, _>>()?;
            let per_x = rows.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let attributed = (0..n).map(|l| rows.iter().map(|r| r[l]).sum::<f64>() / n as f64).collect();
            (per_x, attributed)
        };
        let full = pointwise.iter().zip(&per_x).map(|(p, m)| p + m).collect();
        Ok(EnsembleGenerator { full, pointwise, attributed })
    }
}

pub(crate) struct EnsembleGenerator {
    pub full: Vec<f64>,
    pub pointwise: Vec<f64>,
    pub attributed: Vec<f64>,
}

/// `Ê_j ∂_μ h(t, X^j, μ)(y)` written into `out`.
pub(crate) fn averaged_dmu(
    h: &dyn LyapunovFunction,
    t: f64,
    mu: &EmpiricalMeasure,
    y: &[f64],
    out: &mut [f64],
) -> Result<(), CalculusError> {
    if h.dmu_independent_of_x() {
        return h.dmu(t, mu.point(0), mu, y, out);
    }
    out.fill(0.0);
    let mut tmp = vec![0.0; out.len()];
    for x in mu.points() {
        h.dmu(t, x, mu, y, &mut tmp)?;
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += v;
        }
    }
    let n = mu.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(())
}
