use serde::Serialize;

use super::{ParticleEnsemble, SolverConfig, SolverError, Stepper};
use crate::coefficients::CoefficientSet;
use crate::measure::EmpiricalMeasure;
use crate::monotone::MonotoneOperator;
use crate::noise::NoisePanel;
use crate::stats::MeanSe;
use crate::vecops::{dist_sq, dot, norm_sq};

/// Hook called after every step with the law at `t_k` and the ensemble at
/// `t_{k+1}` (whose `last_dk` is the increment just applied).
pub trait StepObserver {
    fn start(&mut self, _ens: &ParticleEnsemble) -> Result<(), String> {
        Ok(())
    }
    fn after_step(&mut self, prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String>;
}

struct NoObserver;

impl StepObserver for NoObserver {
    fn after_step(&mut self, _: &EmpiricalMeasure, _: &ParticleEnsemble) -> Result<(), String> {
        Ok(())
    }
}

/// Ensemble at one grid time together with the `ΔK` that led into it.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub measure: EmpiricalMeasure,
    pub dk: Vec<f64>,
}

/// Per-grid-point statistics of a run. Index `k` is time `k h`.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub n_particles: usize,
    pub step: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `(1/N) Σ |X^i_t|²` and its standard error.
    pub mean_sq: Vec<MeanSe>,
    /// `(1/N) Σ max_{s ≤ t} |X^i_s|²`.
    pub sup_mean_sq: Vec<f64>,
    /// `(1/N) Σ Σ_k |ΔK^i|`.
    pub k_variation_mean: Vec<f64>,
    /// Componentwise ensemble mean and its standard error.
    pub mean: Vec<Vec<MeanSe>>,
    /// Largest distance of a particle to `D(A)`; zero for full-domain operators.
    pub domain_violation: Vec<f64>,
    /// Largest `|X − (ξ − εK + increments)|` over the whole run.
    pub max_reconstruction_error: f64,
    pub snapshots: Vec<Snapshot>,
    pub final_ensemble: ParticleEnsemble,
}

impl TrajectoryRecord {
    fn new(cfg: &SolverConfig, ens: &ParticleEnsemble) -> Self {
        TrajectoryRecord {
            dim: ens.dim(),
            n_particles: ens.len(),
            step: cfg.step,
            epsilon: cfg.epsilon,
            times: Vec::new(),
            mean_sq: Vec::new(),
            sup_mean_sq: Vec::new(),
            k_variation_mean: Vec::new(),
            mean: Vec::new(),
            domain_violation: Vec::new(),
            max_reconstruction_error: 0.0,
            snapshots: Vec::new(),
            final_ensemble: ens.clone(),
        }
    }

    fn push(&mut self, ens: &ParticleEnsemble, op: &MonotoneOperator, retain: bool) {
        let mu = ens.measure();
        let n = ens.len() as f64;
        self.times.push(ens.time());
        let sq: Vec<f64> = mu.points().map(norm_sq).collect();
        self.mean_sq.push(MeanSe::from_slice(&sq));
        self.sup_mean_sq.push(ens.sup_sq().iter().sum::<f64>() / n);
        self.k_variation_mean.push(ens.k_variation().iter().sum::<f64>() / n);
        let d = ens.dim();
        let comps = (0..d)
            .map(|j| {
                let v: Vec<f64> = mu.points().map(|p| p[j]).collect();
                MeanSe::from_slice(&v)
            })
            .collect();
        self.mean.push(comps);
        let viol = match op {
            MonotoneOperator::NormalCone { set } => mu.points().map(|p| set.violation(p)).fold(0.0, f64::max),
            _ => 0.0,
        };
        self.domain_violation.push(viol);
        self.max_reconstruction_error = self.max_reconstruction_error.max(ens.reconstruction_error(self.epsilon));
        if retain {
            self.snapshots.push(Snapshot { time: ens.time(), measure: mu.clone(), dk: ens.last_dk().to_vec() });
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Terminal ensemble mean of coordinate `j`.
    pub fn terminal_mean(&self, j: usize) -> MeanSe {
        self.mean[self.mean.len() - 1][j]
    }

    /// `max_t (1/N) Σ max_{s ≤ t} |X_s|²`, the grid estimate of `E sup |X_t|²`.
    pub fn sup_moment(&self) -> f64 {
        self.sup_mean_sq.last().copied().unwrap_or(0.0)
    }
}

fn panel_for(cfg: &SolverConfig, stepper: &Stepper<'_>, noise_dim: usize) -> NoisePanel {
    NoisePanel::new(cfg.seed, cfg.n_particles, noise_dim, cfg.step, cfg.n_steps(), stepper.jump_law())
}

/// Runs the scheme from the configured initial condition.
pub fn simulate(cfg: &SolverConfig, c: &CoefficientSet, op: &MonotoneOperator) -> Result<TrajectoryRecord, SolverError> {
    simulate_observed(cfg, c, op, &mut NoObserver)
}

pub fn simulate_observed(
    cfg: &SolverConfig,
    c: &CoefficientSet,
    op: &MonotoneOperator,
    observer: &mut dyn StepObserver,
) -> Result<TrajectoryRecord, SolverError> {
    let ens = ParticleEnsemble::from_config(cfg)?;
    simulate_from(cfg, c, op, ens, observer)
}

/// Runs the scheme from a given ensemble at `t = 0`.
pub fn simulate_from(
    cfg: &SolverConfig,
    c: &CoefficientSet,
    op: &MonotoneOperator,
    mut ens: ParticleEnsemble,
    observer: &mut dyn StepObserver,
) -> Result<TrajectoryRecord, SolverError> {
    let stepper = Stepper::new(cfg, c, op)?;
    if ens.len() != cfg.n_particles || ens.dim() != c.dim() {
        return Err(SolverError::Config("ensemble shape does not match the configuration".into()));
    }
    ens.check_domain(op)?;
    let m = c.noise_dim();
    let mut panel = panel_for(cfg, &stepper, m);
    let mut db = vec![0.0; cfg.n_particles * m];
    let mut rec = TrajectoryRecord::new(cfg, &ens);
    rec.push(&ens, op, cfg.retain_snapshots);
    observer.start(&ens).map_err(|message| SolverError::Observer { step: 0, message })?;
    for k in 0..cfg.n_steps() {
        panel.fill_increments(k, &mut db);
        let prev = stepper.advance(&mut ens, &panel, &db)?;
        observer
            .after_step(&prev, &ens)
            .map_err(|message| SolverError::Observer { step: k, message })?;
        rec.push(&ens, op, cfg.retain_snapshots);
    }
    rec.final_ensemble = ens;
    Ok(rec)
}

/// Two systems stepped in lockstep on the same noise.
#[derive(Clone, Debug)]
pub struct CoupledRecord {
    pub full: TrajectoryRecord,
    pub averaged: TrajectoryRecord,
    pub times: Vec<f64>,
    /// `D(t) = (1/N) Σ max_{s ≤ t} |X^i_s − Y^i_s|²` with its standard error.
    pub sup_distance: Vec<MeanSe>,
}

/// Steps the original and the averaged system on identical Brownian
/// increments and jump events and tracks their sup-distance.
pub fn simulate_coupled(
    cfg: &SolverConfig,
    full: &CoefficientSet,
    averaged: &CoefficientSet,
    op: &MonotoneOperator,
) -> Result<CoupledRecord, SolverError> {
    if full.dim() != averaged.dim() || full.noise_dim() != averaged.noise_dim() {
        return Err(SolverError::Config("coupled systems differ in state or noise dimension".into()));
    }
    if full.jump_law != averaged.jump_law {
        return Err(SolverError::Config("coupled systems must share one jump law".into()));
    }
    let sx = Stepper::new(cfg, full, op)?;
    let sy = Stepper::new(cfg, averaged, op)?;
    let mut x = ParticleEnsemble::from_config(cfg)?;
    x.check_domain(op)?;
    let mut y = x.clone();
    let m = full.noise_dim();
    let law = sx.jump_law().or(sy.jump_law());
    let mut panel = NoisePanel::new(cfg.seed, cfg.n_particles, m, cfg.step, cfg.n_steps(), law);
    let mut db = vec![0.0; cfg.n_particles * m];
    let mut rx = TrajectoryRecord::new(cfg, &x);
    let mut ry = TrajectoryRecord::new(cfg, &y);
    rx.push(&x, op, false);
    ry.push(&y, op, false);
    let mut sup = vec![0.0; cfg.n_particles];
    let mut series = vec![MeanSe::from_slice(&sup)];
    for k in 0..cfg.n_steps() {
        panel.fill_increments(k, &mut db);
        sx.advance(&mut x, &panel, &db)?;
        sy.advance(&mut y, &panel, &db)?;
        for (i, s) in sup.iter_mut().enumerate() {
            *s = s.max(dist_sq(x.state(i), y.state(i)));
        }
        series.push(MeanSe::from_slice(&sup));
        rx.push(&x, op, false);
        ry.push(&y, op, false);
    }
    rx.final_ensemble = x;
    ry.final_ensemble = y;
    Ok(CoupledRecord { times: rx.times.clone(), full: rx, averaged: ry, sup_distance: series })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowMonotonicityReport {
    /// `min ⟨X_{k+1} − X̃_{k+1}, ΔK − ΔK̃⟩` over all particles and steps.
    pub min_inner: f64,
    pub steps: usize,
    pub particles: usize,
}

/// Runs two ensembles from different starts on shared noise and records the
/// discrete pairing of state differences with `K`-increment differences.
pub fn discrete_flow_monotonicity(
    cfg: &SolverConfig,
    c: &CoefficientSet,
    op: &MonotoneOperator,
    start_a: Vec<f64>,
    start_b: Vec<f64>,
) -> Result<FlowMonotonicityReport, SolverError> {
    let d = c.dim();
    let stepper = Stepper::new(cfg, c, op)?;
    let mut a = ParticleEnsemble::new(d, start_a)?;
    let mut b = ParticleEnsemble::new(d, start_b)?;
    if a.len() != cfg.n_particles || b.len() != cfg.n_particles {
        return Err(SolverError::Config("starting ensembles must have n_particles points".into()));
    }
    a.check_domain(op)?;
    b.check_domain(op)?;
    let m = c.noise_dim();
    let mut panel = panel_for(cfg, &stepper, m);
    let mut db = vec![0.0; cfg.n_particles * m];
    let mut min_inner = f64::INFINITY;
    for k in 0..cfg.n_steps() {
        panel.fill_increments(k, &mut db);
        stepper.advance(&mut a, &panel, &db)?;
        stepper.advance(&mut b, &panel, &db)?;
        for i in 0..cfg.n_particles {
            let dx: Vec<f64> = a.state(i).iter().zip(b.state(i)).map(|(p, q)| p - q).collect();
            let r = i * d..(i + 1) * d;
            let dk: Vec<f64> = a.last_dk()[r.clone()].iter().zip(&b.last_dk()[r]).map(|(p, q)| p - q).collect();
            min_inner = min_inner.min(dot(&dx, &dk));
        }
    }
    if cfg.n_steps() == 0 {
        min_inner = 0.0;
    }
    Ok(FlowMonotonicityReport { min_inner, steps: cfg.n_steps(), particles: cfg.n_particles })
}
