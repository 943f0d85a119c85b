use rayon::prelude::*;

use super::{ParticleEnsemble, Scheme, SolverConfig, SolverError, COMPENSATOR_MARKS};
use crate::coefficients::CoefficientSet;
use crate::measure::EmpiricalMeasure;
use crate::monotone::{MonotoneOperator, PreparedResolvent};
use crate::noise::{stream_rng, JumpLaw, NoisePanel, Purpose};
use crate::vecops::{matvec, norm_sq};

enum Kernel<'a> {
    Resolvent(PreparedResolvent<'a>),
    Yosida { resolvent: PreparedResolvent<'a>, lambda: f64 },
}

/// One configured time step of the particle scheme, reusable across steps
/// and across coupled ensembles.
pub struct Stepper<'a> {
    c: &'a CoefficientSet,
    kernel: Kernel<'a>,
    epsilon: f64,
    h: f64,
    seed: u64,
    law: Option<&'a JumpLaw>,
}

struct Scratch {
    b: Vec<f64>,
    s: Vec<f64>,
    sdb: Vec<f64>,
    f: Vec<f64>,
    pre: Vec<f64>,
    jsum: Vec<f64>,
    comp: Vec<f64>,
    y: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, m: usize) -> Self {
        Scratch {
            b: vec![0.0; d],
            s: vec![0.0; d * m],
            sdb: vec![0.0; d],
            f: vec![0.0; d],
            pre: vec![0.0; d],
            jsum: vec![0.0; d],
            comp: vec![0.0; d],
            y: vec![0.0; d],
        }
    }
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &SolverConfig, c: &'a CoefficientSet, op: &'a MonotoneOperator) -> Result<Self, SolverError> {
        cfg.validate()?;
        if let Some(d) = op.dim() {
            if d != c.dim() {
                return Err(SolverError::Config(format!(
                    "operator acts on R^{d} but the coefficients on R^{}",
                    c.dim()
                )));
            }
        }
        if cfg.initial.dim() != c.dim() {
            return Err(SolverError::Config(format!(
                "initial condition has dimension {} but the coefficients {}",
                cfg.initial.dim(),
                c.dim()
            )));
        }
        let eh = cfg.epsilon * cfg.step;
        let prep = |lambda: f64| {
            op.prepare(lambda)
                .map_err(|e| SolverError::Operator { step: 0, particle: 0, source: e })
        };
        let kernel = match cfg.scheme {
            Scheme::ResolventSplit => Kernel::Resolvent(prep(eh)?),
            Scheme::YosidaExplicit { lambda } => Kernel::Yosida { resolvent: prep(lambda)?, lambda },
        };
        let law = if c.has_jumps() { c.jump_law.as_ref() } else { None };
        Ok(Stepper { c, kernel, epsilon: cfg.epsilon, h: cfg.step, seed: cfg.seed, law })
    }

    /// Jump law driving this system, if jumps are active.
    pub fn jump_law(&self) -> Option<&'a JumpLaw> {
        self.law
    }

    /// Marks for the Monte Carlo compensator of step `k`, shared by all
    /// particles (and by coupled systems).
    fn compensator_marks(&self, k: usize) -> Vec<Vec<f64>> {
        match self.law {
            Some(law) if !self.c.model.jump_is_mark_linear() => {
                let mut rng = stream_rng(self.seed, Purpose::Compensator, k as u64);
                (0..COMPENSATOR_MARKS).map(|_| law.sample_mark(&mut rng)).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Advances `ens` from `t_k` to `t_{k+1}` using Brownian increments
    /// `db` (`N × m`) and the jump events of `panel`. Returns the empirical
    /// law at `t_k`.
    pub fn advance(
        &self,
        ens: &mut ParticleEnsemble,
        panel: &NoisePanel,
        db: &[f64],
    ) -> Result<EmpiricalMeasure, SolverError> {
        let d = ens.dim();
        let m = self.c.noise_dim();
        let n = ens.len();
        let k = ens.step_index;
        if db.len() != n * m {
            return Err(SolverError::Config(format!(
                "expected {} Brownian increments, got {}",
                n * m,
                db.len()
            )));
        }
        if self.law.is_some() && panel.particles() != n {
            return Err(SolverError::Config(format!(
                "noise panel covers {} particles, ensemble has {n}",
                panel.particles()
            )));
        }
        let t = k as f64 * self.h;
        let t_next = (k + 1) as f64 * self.h;
        let marks = self.compensator_marks(k);
        let mu = &ens.measure;
        let mut next = vec![0.0; n * d];

        let failure = (
            next.par_chunks_mut(d),
            ens.k_accum.par_chunks_mut(d),
            ens.increments.par_chunks_mut(d),
            ens.last_dk.par_chunks_mut(d),
            ens.k_variation.par_iter_mut(),
            ens.sup_sq.par_iter_mut(),
        )
            .into_par_iter()
            .enumerate()
            .map_init(
                || Scratch::new(d, m),
                |sc, (i, (xn, kacc, inc, dk, kvar, sup))| {
                    self.particle(sc, i, k, t, mu, panel, &db[i * m..(i + 1) * m], &marks, xn, dk)
                        .map(|()| {
                            let x = mu.point(i);
                            let mut var = 0.0;
                            for j in 0..d {
                                inc[j] += sc.y[j] - x[j];
                                kacc[j] += dk[j];
                                var += dk[j] * dk[j];
                            }
                            *kvar += var.sqrt();
                            *sup = sup.max(norm_sq(xn));
                        })
                        .err()
                        .map(|e| (i, e))
                },
            )
            .flatten()
            .min_by_key(|(i, _)| *i);
        if let Some((_, e)) = failure {
            return Err(e);
        }
        let prev = std::mem::replace(&mut ens.measure, EmpiricalMeasure::from_states(d, next));
        ens.step_index = k + 1;
        ens.time = t_next;
        Ok(prev)
    }

    #[allow(clippy::too_many_arguments)]
    fn particle(
        &self,
        sc: &mut Scratch,
        i: usize,
        k: usize,
        t: f64,
        mu: &EmpiricalMeasure,
        panel: &NoisePanel,
        db: &[f64],
        marks: &[Vec<f64>],
        xn: &mut [f64],
        dk: &mut [f64],
    ) -> Result<(), SolverError> {
        let d = xn.len();
        let m = db.len();
        let model = &*self.c.model;
        let x = mu.point(i);
        let eh = self.epsilon * self.h;
        let se = self.epsilon.sqrt();

        model.drift(t, x, mu, &mut sc.b);
        model.diffusion(t, x, mu, &mut sc.s);
        matvec(&sc.s, d, m, db, &mut sc.sdb);
        for j in 0..d {
            sc.y[j] = x[j] + eh * sc.b[j] + se * sc.sdb[j];
        }

        if let Some(law) = self.law {
            sc.pre.copy_from_slice(x);
            sc.jsum.fill(0.0);
            for e in panel.jumps_in(i, k) {
                model.jump(e.time, &sc.pre, mu, &e.mark, &mut sc.f);
                for j in 0..d {
                    sc.jsum[j] += sc.f[j];
                    sc.pre[j] += se * sc.f[j];
                }
            }
            if marks.is_empty() {
                model.jump(t, x, mu, &law.mean_mark(), &mut sc.f);
                for j in 0..d {
                    sc.comp[j] = law.total_rate * sc.f[j];
                }
            } else {
                sc.comp.fill(0.0);
                for u in marks {
                    model.jump(t, x, mu, u, &mut sc.f);
                    for j in 0..d {
                        sc.comp[j] += sc.f[j];
                    }
                }
                let w = law.total_rate / marks.len() as f64;
                sc.comp.iter_mut().for_each(|v| *v *= w);
            }
            for j in 0..d {
                sc.y[j] += se * (sc.jsum[j] - self.h * sc.comp[j]);
            }
        }

        let op_err = |source| SolverError::Operator { step: k, particle: i, source };
        match &self.kernel {
            Kernel::Resolvent(j) => {
                xn.copy_from_slice(&sc.y);
                j.apply(xn).map_err(op_err)?;
                for c in 0..d {
                    dk[c] = (sc.y[c] - xn[c]) / self.epsilon;
                }
            }
            Kernel::Yosida { resolvent, lambda } => {
                dk.copy_from_slice(x);
                resolvent.apply(dk).map_err(op_err)?;
                for c in 0..d {
                    dk[c] = self.h * (x[c] - dk[c]) / lambda;
                    xn[c] = sc.y[c] - self.epsilon * dk[c];
                }
            }
        }
        ParticleEnsemble::guard(i, k, (k + 1) as f64 * self.h, xn)
    }
}
