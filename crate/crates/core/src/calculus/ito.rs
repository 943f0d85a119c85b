use rayon::prelude::*;
use serde::Serialize;

use super::generator::{averaged_dmu, Generator, GeneratorOptions};
use super::{CalculusError, LyapunovFunction};
use crate::coefficients::CoefficientSet;
use crate::measure::EmpiricalMeasure;
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{ParticleEnsemble, StepObserver, TrajectoryRecord};
use crate::stats::MeanSe;
use crate::vecops::dot;

/// Discrete Itô-formula residual along a simulated trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct ItoReport {
    pub times: Vec<f64>,
    /// `R(t_k)`.
    pub residual: Vec<f64>,
    pub final_residual: f64,
    /// Mean and standard error of the per-particle attributed residuals.
    pub attributed: MeanSe,
    /// `R(T)` divided by the standard error of `attributed`.
    pub z: f64,
}

/// Accumulates
///
/// ```text
/// R(t) = Ê h(t, X_t, μ̂_t) − Ê h(0, ξ, μ̂_0) − Σ_k Ê[∂_t h + 𝕃h](t_k) h
///        + Σ_k Ê⟨∂_x h, εΔK⟩ + Σ_k Ê Ê⟨∂_μ h(·)(X), εΔK⟩
/// ```
///
/// with generator terms at the left end of each step and `K` terms at the
/// right end. The martingale terms drop out under the particle average.
///
/// For the error bar each step's contribution is split among particles:
/// the change of `h` at `x` with the measure frozen, the first-order
/// L-derivative share of the measure change, the particle's share of the
/// generator's measure integrals, and the particle's `K` terms. The
/// per-particle totals are approximately independent, so their standard
/// error is the error bar of `R`.
pub struct ItoAccumulator<'a> {
    c: &'a CoefficientSet,
    h: &'a dyn LyapunovFunction,
    opts: GeneratorOptions,
    step: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    h0: f64,
    generator_sum: f64,
    k_sum: f64,
    per_particle: Vec<f64>,
    times: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> ItoAccumulator<'a> {
    pub fn new(
        c: &'a CoefficientSet,
        h: &'a dyn LyapunovFunction,
        opts: GeneratorOptions,
        step: f64,
    ) -> Result<Self, CalculusError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(CalculusError::InvalidInput(format!("step must be positive, got {step}")));
        }
        let (nodes, weights) = gauss_legendre_unit(opts.eta_nodes.max(1));
        Ok(ItoAccumulator {
            c,
            h,
            opts,
            step,
            nodes,
            weights,
            h0: 0.0,
            generator_sum: 0.0,
            k_sum: 0.0,
            per_particle: Vec::new(),
            times: Vec::new(),
            residual: Vec::new(),
        })
    }

    fn mean_h(&self, t: f64, mu: &EmpiricalMeasure) -> f64 {
        let v: Vec<f64> = (0..mu.len()).into_par_iter().map(|i| self.h.value(t, mu.point(i), mu)).collect();
        v.iter().sum::<f64>() / mu.len() as f64
    }

    pub fn start(&mut self, mu0: &EmpiricalMeasure) {
        self.h0 = self.mean_h(0.0, mu0);
        self.generator_sum = 0.0;
        self.k_sum = 0.0;
        self.per_particle = vec![0.0; mu0.len()];
        self.times = vec![0.0];
        self.residual = vec![0.0];
    }

    /// Step `k`: `prev` is the law at `t_k`, `next` at `t_{k+1}`, `dk` the
    /// unscaled `ΔK` that produced `next`.
    pub fn step(
        &mut self,
        k: usize,
        prev: &EmpiricalMeasure,
        next: &EmpiricalMeasure,
        dk: &[f64],
    ) -> Result<(), CalculusError> {
        let n = prev.len();
        let d = prev.dim();
        if next.len() != n || dk.len() != n * d || self.per_particle.len() != n {
            return Err(CalculusError::InvalidInput("inconsistent ensemble sizes in Itô step".into()));
        }
        let t0 = k as f64 * self.step;
        let t1 = (k + 1) as f64 * self.step;
        let eps = self.opts.epsilon;
        let gen = Generator::new(self.c, self.h, &self.opts, k as u64)?.ensemble(t0, prev)?;
        self.generator_sum += self.step * gen.full.iter().sum::<f64>() / n as f64;

        let h = self.h;
        let (nodes, weights) = (&self.nodes, &self.weights);
        let dmu_indep = h.dmu_independent_of_x();
        // Pointwise K term, measure K term and the frozen-measure change of h.
        let parts: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xk = prev.point(i);
                let x1 = next.point(i);
                let dki = &dk[i * d..(i + 1) * d];
                let edk: Vec<f64> = dki.iter().map(|v| eps * v).collect();
                let moved = dki.iter().any(|&v| v != 0.0);
                let mut g = vec![0.0; d];
                let (mut p, mut q) = (0.0, 0.0);
                if moved {
                    h.dx(t1, x1, next, &mut g)?;
                    p = dot(&g, &edk);
                    averaged_dmu(h, t1, next, x1, &mut g)?;
                    q = dot(&g, &edk);
                }
                // First-order share of μ_k → μ_{k+1} carried by particle i.
                let dx: Vec<f64> = x1.iter().zip(xk).map(|(a, b)| a - b).collect();
                let mut a = 0.0;
                if dx.iter().any(|&v| v != 0.0) {
                    let mut z = vec![0.0; d];
                    for (eta, w) in nodes.iter().zip(weights) {
                        for j in 0..d {
                            z[j] = xk[j] + eta * dx[j];
                        }
                        if dmu_indep {
                            h.dmu(t0, xk, prev, &z, &mut g)?;
                        } else {
                            averaged_dmu(h, t0, prev, &z, &mut g)?;
                        }
                        a += w * dot(&g, &dx);
                    }
                }
                let local = h.value(t1, x1, prev) - h.value(t0, xk, prev) + a;
                Ok((p, q, local))
            })
            .collect::<Result<_, CalculusError>>()?;

        let mut k_step = 0.0;
        for (i, (p, q, local)) in parts.iter().enumerate() {
            k_step += p + q;
            self.per_particle[i] += local - self.step * (gen.pointwise[i] + gen.attributed[i]) + p + q;
        }
        self.k_sum += k_step / n as f64;
        let r = self.mean_h(t1, next) - self.h0 - self.generator_sum + self.k_sum;
        self.times.push(t1);
        self.residual.push(r);
        Ok(())
    }

    pub fn report(&self) -> ItoReport {
        let attributed = MeanSe::from_slice(&self.per_particle);
        let r = self.residual.last().copied().unwrap_or(0.0);
        let z = MeanSe { mean: r, ..attributed }.z_score(0.0);
        ItoReport { times: self.times.clone(), residual: self.residual.clone(), final_residual: r, attributed, z }
    }
}

/// [`ItoAccumulator`] driven online by the solver.
pub struct ItoObserver<'a> {
    pub acc: ItoAccumulator<'a>,
}

impl StepObserver for ItoObserver<'_> {
    fn start(&mut self, ens: &ParticleEnsemble) -> Result<(), String> {
        self.acc.start(ens.measure());
        Ok(())
    }

    fn after_step(&mut self, prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String> {
        self.acc
            .step(ens.step_index() - 1, prev, ens.measure(), ens.last_dk())
            .map_err(|e| e.to_string())
    }
}

/// Replays the residual over a trajectory that retained its snapshots.
pub fn ito_residual(
    traj: &TrajectoryRecord,
    h: &dyn LyapunovFunction,
    c: &CoefficientSet,
    opts: &GeneratorOptions,
) -> Result<ItoReport, CalculusError> {
    if traj.snapshots.len() != traj.times.len() || traj.snapshots.is_empty() {
        return Err(CalculusError::InvalidInput("trajectory has no retained snapshots".into()));
    }
    let mut o = opts.clone();
    o.epsilon = traj.epsilon;
    let mut acc = ItoAccumulator::new(c, h, o, traj.step)?;
    acc.start(&traj.snapshots[0].measure);
    for (k, w) in traj.snapshots.windows(2).enumerate() {
        acc.step(k, &w[0].measure, &w[1].measure, &w[1].dk)?;
    }
    Ok(acc.report())
}
