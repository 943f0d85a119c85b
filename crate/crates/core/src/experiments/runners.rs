use std::path::Path;

use serde_json::json;

use super::config::{Criterion, ExperimentConfig, ExperimentSpec, StabilitySpec};
use super::output::*;
use super::{code_version, ExperimentError, ExperimentReport, Provenance};
use crate::calculus::{CalculusError, GeneratorOptions, ItoAccumulator, ItoObserver, ItoReport};
use crate::coefficients::{audit_inherited_bounds, sample_measure, time_average_defect, CoefficientSet, MEASURE_POINTS};
use crate::measure::EmpiricalMeasure;
use crate::monotone::{audit_monotonicity, MonotoneOperator};
use crate::noise::{GaussianSource, PointSource};
use crate::solver::{
    discrete_flow_monotonicity, simulate, simulate_coupled, simulate_observed, ParticleEnsemble, Snapshot,
    SolverError, StepObserver,
};
use crate::stability::{
    audit_lyapunov_conditions, check_as_stability, check_exponential_envelope, check_ultimate_boundedness,
    default_window, fit_exponential_decay, StabilityReport, TailSupObserver, Verdict,
};
use crate::stats::{MeanSe, Z95};

fn finish(
    cfg: &ExperimentConfig,
    mut dir: RunDir,
    summary: serde_json::Value,
    verdicts: Vec<Verdict>,
) -> Result<ExperimentReport, ExperimentError> {
    if !verdicts.is_empty() {
        let mut f = dir.csv("verdicts.csv", &VERDICT_COLUMNS)?;
        for v in &verdicts {
            f.row(&[
                Cell::S(&v.criterion),
                Cell::S(&v.parameters),
                Cell::F(v.margin),
                Cell::S(if v.passed { "pass" } else { "fail" }),
            ])?;
        }
        f.finish()?;
    }
    dir.text("config.toml", &cfg.to_toml())?;
    let report = ExperimentReport {
        kind: cfg.experiment.kind(),
        csv: dir.files.clone(),
        summary,
        verdicts,
        provenance: Provenance { config_hash: cfg.hash(), seed: cfg.solver.seed, version: code_version() },
    };
    dir.json("report.json", &report)?;
    Ok(report)
}

fn coefficients(cfg: &ExperimentConfig) -> Result<CoefficientSet, ExperimentError> {
    cfg.coefficients().map_err(ExperimentError::numerical("system.coefficients"))
}

fn calculus_err(context: &str) -> impl FnOnce(CalculusError) -> ExperimentError + '_ {
    move |e| match e {
        CalculusError::Solver(source) => ExperimentError::Solver { context: context.into(), source },
        other => ExperimentError::Numerical { context: context.into(), message: other.to_string() },
    }
}

fn verdict(criterion: &str, parameters: String, margin: f64, passed: bool) -> Verdict {
    Verdict { criterion: criterion.into(), parameters, margin, passed }
}

/// Simulates every configured `ε` and writes the grid statistics.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let c = coefficients(cfg)?;
    let op = &cfg.system.operator;
    let mut dir = RunDir::create(out)?;
    let mut traj_csv = dir.csv("trajectory.csv", &TRAJECTORY_COLUMNS)?;
    let mut means_csv = dir.csv("means.csv", &MEANS_COLUMNS)?;
    let mut snap_csv = match cfg.output.retain_snapshots {
        true => Some(dir.csv("snapshots.csv", &SNAPSHOT_COLUMNS)?),
        false => None,
    };
    let mut runs = Vec::new();
    let mut verdicts = Vec::new();
    for &eps in &cfg.solver.epsilon {
        let mut sc = cfg.solver_config(eps);
        sc.retain_snapshots = cfg.output.retain_snapshots;
        let traj = simulate(&sc, &c, op).map_err(ExperimentError::solver(format!("simulate (epsilon = {eps})")))?;
        for k in 0..traj.len() {
            let t = traj.times[k];
            traj_csv.row(&[
                Cell::F(eps),
                Cell::F(t),
                Cell::F(traj.mean_sq[k].mean),
                Cell::F(traj.mean_sq[k].se),
                Cell::F(traj.sup_mean_sq[k]),
                Cell::F(traj.k_variation_mean[k]),
                Cell::F(traj.domain_violation[k]),
            ])?;
            for (j, m) in traj.mean[k].iter().enumerate() {
                means_csv.row(&[Cell::F(eps), Cell::F(t), Cell::U(j), Cell::F(m.mean), Cell::F(m.se)])?;
            }
        }
        if let Some(f) = snap_csv.as_mut() {
            for s in &traj.snapshots {
                for (i, p) in s.measure.points().enumerate() {
                    for (j, v) in p.iter().enumerate() {
                        f.row(&[Cell::F(eps), Cell::F(s.time), Cell::U(i), Cell::U(j), Cell::F(*v)])?;
                    }
                }
            }
        }
        let worst_violation = traj.domain_violation.iter().copied().fold(0.0, f64::max);
        if !op.full_domain() {
            verdicts.push(verdict(
                "domain_invariance",
                format!("epsilon={eps}"),
                0.0 - worst_violation,
                worst_violation == 0.0,
            ));
        }
        let last = traj.len() - 1;
        runs.push(json!({
            "epsilon": eps,
            "terminal_mean_sq": traj.mean_sq[last],
            "terminal_mean": traj.mean[last],
            "sup_moment": traj.sup_moment(),
            "k_variation": traj.k_variation_mean[last],
            "max_domain_violation": worst_violation,
            "max_reconstruction_error": traj.max_reconstruction_error,
        }));
    }
    traj_csv.finish()?;
    means_csv.finish()?;
    if let Some(f) = snap_csv {
        f.finish()?;
    }
    finish(cfg, dir, json!({ "runs": runs }), verdicts)
}

/// Couples the original and averaged systems for each `ε` and records
/// `D(T) = Ê sup_t |X_t − Y_t|²` with the Chebyshev tail bound `D(T)/δ²`.
pub fn run_averaging_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let ExperimentSpec::Averaging { chebyshev_delta: delta } = cfg.experiment else {
        return Err(ExperimentError::Numerical { context: "averaging".into(), message: "not an averaging config".into() });
    };
    let full = coefficients(cfg)?;
    let avg = cfg
        .averaged()
        .map_err(ExperimentError::numerical("system.averaged"))?
        .ok_or_else(|| ExperimentError::Numerical { context: "system.averaged".into(), message: "missing".into() })?;
    let op = &cfg.system.operator;
    let mut dir = RunDir::create(out)?;
    let mut series_csv = dir.csv("averaging_series.csv", &AVERAGING_SERIES_COLUMNS)?;
    let mut summary_csv = dir.csv("averaging_summary.csv", &AVERAGING_SUMMARY_COLUMNS)?;
    let mut rows: Vec<(f64, MeanSe)> = Vec::new();
    for &eps in &cfg.solver.epsilon {
        let sc = cfg.solver_config(eps);
        let rec = simulate_coupled(&sc, &full, &avg, op)
            .map_err(ExperimentError::solver(format!("coupled run (epsilon = {eps})")))?;
        for (t, d) in rec.times.iter().zip(&rec.sup_distance) {
            series_csv.row(&[Cell::F(eps), Cell::F(*t), Cell::F(d.mean), Cell::F(d.se)])?;
        }
        let d = *rec.sup_distance.last().expect("grid has t = 0");
        let (lo, hi) = d.ci95();
        summary_csv.row(&[
            Cell::F(eps),
            Cell::F(d.mean),
            Cell::F(d.se),
            Cell::F(lo),
            Cell::F(hi),
            Cell::F(delta),
            Cell::F(d.mean / (delta * delta)),
        ])?;
        rows.push((eps, d));
    }
    series_csv.finish()?;
    summary_csv.finish()?;

    let mut verdicts = Vec::new();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1.mean < w[0].1.mean);
    if rows.len() >= 2 {
        // Consecutive rises are tolerated while they stay inside the joint 95% band.
        let margin = rows
            .windows(2)
            .map(|w| {
                let band = Z95 * (w[0].1.se.powi(2) + w[1].1.se.powi(2)).sqrt();
                band - (w[1].1.mean - w[0].1.mean)
            })
            .fold(f64::INFINITY, f64::min);
        verdicts.push(verdict("monotone_decrease", "95% band".into(), margin, margin >= 0.0));
        let (first, last) = (rows[0].1, rows[rows.len() - 1].1);
        let sep = first.ci95().0 - last.ci95().1;
        verdicts.push(verdict(
            "ci_separation",
            format!("epsilon={} vs {}", rows[0].0, rows[rows.len() - 1].0),
            sep,
            sep > 0.0,
        ));
    }
    let ratio = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if a.1.mean > 0.0 => Some(b.1.mean / a.1.mean),
        _ => None,
    };
    let summary = json!({
        "chebyshev_delta": delta,
        "rows": rows.iter().map(|(e, d)| json!({
            "epsilon": e,
            "d_t": d,
            "ci95": d.ci95(),
            "chebyshev_bound": d.mean / (delta * delta),
        })).collect::<Vec<_>>(),
        "strictly_decreasing": strictly_decreasing,
        "smallest_to_largest_ratio": ratio,
    });
    finish(cfg, dir, summary, verdicts)
}

/// Records `(t, μ̂_t, ΔK)` every `every` steps.
struct SnapshotObserver {
    every: usize,
    snaps: Vec<Snapshot>,
}

impl SnapshotObserver {
    fn take(&mut self, ens: &ParticleEnsemble) {
        if ens.step_index() % self.every == 0 {
            self.snaps.push(Snapshot { time: ens.time(), measure: ens.measure().clone(), dk: ens.last_dk().to_vec() });
        }
    }
}

impl StepObserver for SnapshotObserver {
    fn start(&mut self, ens: &ParticleEnsemble) -> Result<(), String> {
        self.take(ens);
        Ok(())
    }

    fn after_step(&mut self, _prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String> {
        self.take(ens);
        Ok(())
    }
}

struct Both<'a>(&'a mut dyn StepObserver, Option<&'a mut SnapshotObserver>);

impl StepObserver for Both<'_> {
    fn start(&mut self, ens: &ParticleEnsemble) -> Result<(), String> {
        self.0.start(ens)?;
        match self.1.as_mut() {
            Some(s) => s.start(ens),
            None => Ok(()),
        }
    }

    fn after_step(&mut self, prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String> {
        self.0.after_step(prev, ens)?;
        match self.1.as_mut() {
            Some(s) => s.after_step(prev, ens),
            None => Ok(()),
        }
    }
}

/// Simulates once and evaluates each requested stability criterion.
pub fn run_stability_battery(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let ExperimentSpec::Stability(st) = &cfg.experiment else {
        return Err(ExperimentError::Numerical { context: "stability".into(), message: "not a stability config".into() });
    };
    let mut dir = RunDir::create(out)?;
    if st.criteria.is_empty() {
        let summary = serde_json::to_value(StabilityReport::default()).expect("report serializes");
        return finish(cfg, dir, summary, Vec::new());
    }
    let c = coefficients(cfg)?;
    let eps = cfg.solver.epsilon[0];
    let sc = cfg.solver_config(eps);
    let horizon = cfg.solver.horizon;
    let mut tail = TailSupObserver::new(st.t_tail.unwrap_or(0.5 * horizon));
    let mut snaps = SnapshotObserver { every: st.audit_every, snaps: Vec::new() };
    let wants_audit = st.criteria.contains(&Criterion::Lyapunov);
    let traj = {
        let mut obs = Both(&mut tail, wants_audit.then_some(&mut snaps));
        simulate_observed(&sc, &c, &cfg.system.operator, &mut obs).map_err(ExperimentError::solver("stability run"))?
    };

    let mut series = dir.csv("stability_series.csv", &STABILITY_SERIES_COLUMNS)?;
    for (t, q) in traj.times.iter().zip(&traj.mean_sq) {
        series.row(&[Cell::F(*t), Cell::F(q.mean), Cell::F(q.se)])?;
    }
    series.finish()?;

    let xi_ms = traj.mean_sq[0].mean;
    let window = st.fit_window.map(|[a, b]| (a, b)).unwrap_or_else(|| default_window(horizon));
    let means: Vec<f64> = traj.mean_sq.iter().map(|q| q.mean).collect();
    let fit = fit_exponential_decay(&traj.times, &means, window, xi_ms);
    let mut report = StabilityReport { bound_w: st.w, ..Default::default() };
    let fit_note = match &fit {
        Ok(f) => {
            report.fitted_alpha = Some(f.alpha);
            report.fitted_c = Some(f.c);
            report.fit_r2 = Some(f.r2);
            None
        }
        Err(e) => Some(e.to_string()),
    };
    let stab_err = |ctx: &'static str| move |e: crate::stability::StabilityError| ExperimentError::Numerical {
        context: ctx.into(),
        message: e.to_string(),
    };
    let mut audit_json = None;
    for crit in &st.criteria {
        match crit {
            Criterion::Exponential => {
                let alpha = st.alpha.expect("validated");
                let v = check_exponential_envelope(&traj.times, &traj.mean_sq, st.ratio, alpha, xi_ms)
                    .map_err(stab_err("exponential"))?;
                report.verdicts.push(verdict(
                    "exponential",
                    format!("alpha={alpha};ratio={};slack=3se", st.ratio),
                    v.worst_margin,
                    v.passed,
                ));
            }
            Criterion::Ultimate => {
                let (lambda, w) = (st.lambda.expect("validated"), st.w.expect("validated"));
                let v = check_ultimate_boundedness(&traj.times, &traj.mean_sq, st.m, lambda, w, xi_ms)
                    .map_err(stab_err("ultimate"))?;
                report.verdicts.push(verdict(
                    "ultimate",
                    format!("m={};lambda={lambda};w={w};slack=3se", st.m),
                    v.worst_margin,
                    v.passed,
                ));
            }
            Criterion::AlmostSure => {
                let v = check_as_stability(&tail.sup, st.delta).map_err(stab_err("almost_sure"))?;
                report.as_fraction = Some(v.fraction);
                report.verdicts.push(verdict(
                    "almost_sure",
                    format!("delta={};t_tail={};proxy=tail_sup", st.delta, tail.t_tail),
                    v.fraction - v.threshold,
                    v.passed,
                ));
            }
            Criterion::Lyapunov => {
                let a = lyapunov_audit(st, &c, eps, &snaps.snaps, cfg.solver.seed)?;
                let form = match a.form {
                    crate::stability::AuditForm::Integrated => "integrated",
                    crate::stability::AuditForm::Pointwise => "pointwise",
                };
                let p = format!("function={};form={form};alpha={}", a.function, st.alpha.unwrap_or(0.0));
                report.verdicts.push(verdict("lyapunov_generator", p.clone(), a.generator_margin, a.generator_ok()));
                report.verdicts.push(verdict(
                    "lyapunov_sandwich",
                    p.clone(),
                    a.lower_margin.min(a.upper_margin),
                    a.sandwich_ok(),
                ));
                report.verdicts.push(verdict(
                    "lyapunov_k_pairing",
                    p,
                    a.k_pairing_min.unwrap_or(0.0),
                    a.k_pairing_ok(),
                ));
                audit_json = Some(serde_json::to_value(&a).expect("audit serializes"));
            }
        }
    }
    let verdicts = report.verdicts.clone();
    let summary = json!({
        "report": report,
        "fit_window": window,
        "fit_error": fit_note,
        "xi_mean_sq": xi_ms,
        "lyapunov_audit": audit_json,
    });
    finish(cfg, dir, summary, verdicts)
}

fn lyapunov_audit(
    st: &StabilitySpec,
    c: &CoefficientSet,
    eps: f64,
    snaps: &[Snapshot],
    seed: u64,
) -> Result<crate::stability::LyapunovAudit, ExperimentError> {
    let v = st.lyapunov.as_ref().expect("validated");
    let bounds = st.bounds.as_ref().expect("validated");
    let opts = GeneratorOptions { epsilon: eps, seed, ..Default::default() };
    audit_lyapunov_conditions(v, c, st.alpha.expect("validated"), bounds, snaps, &opts, true).map_err(|e| {
        ExperimentError::Numerical { context: "lyapunov audit".into(), message: e.to_string() }
    })
}

fn ito_run(
    cfg: &ExperimentConfig,
    c: &CoefficientSet,
    step: f64,
) -> Result<ItoReport, ExperimentError> {
    let ExperimentSpec::ItoCheck(spec) = &cfg.experiment else { unreachable!() };
    let eps = cfg.solver.epsilon[0];
    let mut sc = cfg.solver_config(eps);
    sc.step = step;
    let opts = GeneratorOptions { jump_marks: spec.jump_marks, eta_nodes: spec.eta_nodes, epsilon: eps, seed: sc.seed };
    let acc = ItoAccumulator::new(c, &spec.function, opts, step).map_err(calculus_err("ito accumulator"))?;
    let mut obs = ItoObserver { acc };
    simulate_observed(&sc, c, &cfg.system.operator, &mut obs).map_err(|e| match e {
        SolverError::Observer { step, message } => ExperimentError::Numerical {
            context: format!("ito residual at step {step}"),
            message,
        },
        other => ExperimentError::Solver { context: format!("ito run (h = {step})"), source: other },
    })?;
    Ok(obs.acc.report())
}

/// Accumulates the Itô residual online, optionally again at half the step.
pub fn run_ito_check(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let ExperimentSpec::ItoCheck(spec) = &cfg.experiment else {
        return Err(ExperimentError::Numerical { context: "ito_check".into(), message: "not an ito_check config".into() });
    };
    let c = coefficients(cfg)?;
    let mut dir = RunDir::create(out)?;
    let rep = ito_run(cfg, &c, cfg.solver.step)?;
    let mut f = dir.csv("ito_residual.csv", &ITO_COLUMNS)?;
    for (t, r) in rep.times.iter().zip(&rep.residual) {
        f.row(&[Cell::F(*t), Cell::F(*r)])?;
    }
    f.finish()?;
    let mut verdicts = vec![verdict("z_score", "bound=4".into(), 4.0 - rep.z.abs(), rep.z.abs() <= 4.0)];
    let mut halved = None;
    if spec.compare_halved {
        let h2 = ito_run(cfg, &c, 0.5 * cfg.solver.step)?;
        let ratio = rep.final_residual.abs() / h2.final_residual.abs();
        verdicts.push(verdict("step_halving", "min_ratio=1.5".into(), ratio - 1.5, ratio >= 1.5));
        halved = Some(json!({ "final_residual": h2.final_residual, "z": h2.z, "ratio": ratio }));
    }
    let summary = json!({
        "function": spec.function,
        "final_residual": rep.final_residual,
        "attributed": rep.attributed,
        "z": rep.z,
        "halved": halved,
    });
    finish(cfg, dir, summary, verdicts)
}

/// Sampling audits of the operator, the coefficients and, when present,
/// the averaged coefficients.
pub fn run_audits(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let ExperimentSpec::Audits(spec) = &cfg.experiment else {
        return Err(ExperimentError::Numerical { context: "audits".into(), message: "not an audits config".into() });
    };
    let c = coefficients(cfg)?;
    let op = &cfg.system.operator;
    let d = c.dim();
    let seed = cfg.solver.seed;
    let mut dir = RunDir::create(out)?;
    let mut f = dir.csv("audits.csv", &AUDIT_COLUMNS)?;
    let mut verdicts = Vec::new();
    let mut summary = serde_json::Map::new();
    let yes_no = |b: bool| if b { "pass" } else { "fail" };

    let mut src = GaussianSource::new(d, spec.scale, seed);
    let mono = audit_monotonicity(op, &mut src, spec.samples, spec.lambda, 1e-12)
        .map_err(|e| ExperimentError::Numerical { context: "monotonicity audit".into(), message: e.to_string() })?;
    f.row(&[Cell::S("monotonicity"), Cell::S("min_inner"), Cell::F(mono.min_inner), Cell::S(yes_no(mono.passed()))])?;
    f.row(&[
        Cell::S("monotonicity"),
        Cell::S("violations"),
        Cell::U(mono.violations),
        Cell::S(yes_no(mono.passed())),
    ])?;
    verdicts.push(verdict("monotonicity", format!("lambda={};tol=1e-12", spec.lambda), mono.min_inner, mono.passed()));

    let mut src = GaussianSource::new(d, spec.scale, seed.wrapping_add(1));
    let growth = c.growth_audit(&mut src, spec.samples, 0.0);
    f.row(&[
        Cell::S("growth"),
        Cell::S("worst_drift_ratio"),
        Cell::F(growth.worst_drift_ratio),
        Cell::S(yes_no(growth.passed())),
    ])?;
    f.row(&[
        Cell::S("growth"),
        Cell::S("worst_jump_ratio"),
        Cell::F(growth.worst_jump_ratio),
        Cell::S(yes_no(growth.passed())),
    ])?;
    verdicts.push(verdict(
        "growth",
        format!("l2={}", c.l2),
        1.0 - growth.worst_drift_ratio.max(growth.worst_jump_ratio),
        growth.passed(),
    ));

    let flow = flow_audit(cfg, &c, op, spec.scale)?;
    f.row(&[Cell::S("flow_monotonicity"), Cell::S("min_inner"), Cell::F(flow), Cell::S(yes_no(flow >= -1e-12))])?;
    verdicts.push(verdict("flow_monotonicity", "tol=1e-12".into(), flow, flow >= -1e-12));

    if let Some(avg) = cfg.averaged().map_err(ExperimentError::numerical("system.averaged"))? {
        let mut src = GaussianSource::new(d, spec.scale, seed.wrapping_add(2));
        let x = src.sample();
        let mu = sample_measure(&mut src, d, MEASURE_POINTS);
        let defect = time_average_defect(&*c.model, &*avg.model, c.jump_law.as_ref(), &x, &mu, spec.t1, spec.n_quad)
            .map_err(|e| ExperimentError::Numerical { context: "averaging defect".into(), message: e.to_string() })?;
        for (q, v) in [("psi1", defect.psi1), ("psi2", defect.psi2), ("psi3", defect.psi3)] {
            f.row(&[Cell::S("averaging_defect"), Cell::S(q), Cell::F(v), Cell::S("")])?;
        }
        let inh = audit_inherited_bounds(&*avg.model, &c, &mut src, spec.samples);
        for (q, v) in [
            ("continuity_m", inh.continuity_m),
            ("jump_continuity_m", inh.jump_continuity_m),
            ("growth_ratio", inh.growth_ratio),
            ("jump_growth_ratio", inh.jump_growth_ratio),
            ("growth_limit", inh.growth_limit),
        ] {
            f.row(&[Cell::S("inherited_bounds"), Cell::S(q), Cell::F(v), Cell::S("")])?;
        }
        f.row(&[
            Cell::S("inherited_bounds"),
            Cell::S("growth_flags"),
            Cell::U(inh.growth_flags),
            Cell::S(yes_no(inh.growth_flags == 0)),
        ])?;
        verdicts.push(verdict(
            "inherited_growth",
            format!("limit={}", inh.growth_limit),
            0.0 - inh.growth_flags as f64,
            inh.growth_flags == 0,
        ));
        summary.insert("averaging_defect".into(), serde_json::to_value(defect).expect("serializes"));
        summary.insert("inherited_bounds".into(), serde_json::to_value(&inh).expect("serializes"));
    }
    f.finish()?;
    summary.insert("flow_min_inner".into(), json!(flow));
    summary.insert("monotonicity_min_inner".into(), json!(mono.min_inner));
    summary.insert("growth".into(), json!({
        "worst_drift_ratio": growth.worst_drift_ratio,
        "worst_jump_ratio": growth.worst_jump_ratio,
    }));
    finish(cfg, dir, serde_json::Value::Object(summary), verdicts)
}

/// Discrete pairing `⟨ΔX, ΔK⟩` between two ensembles started from
/// resolvent images of Gaussian samples.
fn flow_audit(cfg: &ExperimentConfig, c: &CoefficientSet, op: &MonotoneOperator, scale: f64) -> Result<f64, ExperimentError> {
    let d = c.dim();
    let mut sc = cfg.solver_config(cfg.solver.epsilon[0]);
    sc.n_particles = sc.n_particles.min(256);
    sc.horizon = sc.horizon.min(100.0 * sc.step);
    sc.horizon = (sc.horizon / sc.step).round() * sc.step;
    let prepared = op
        .prepare(1.0)
        .map_err(|e| ExperimentError::Numerical { context: "flow audit".into(), message: e.to_string() })?;
    let start = |k: u64| -> Result<Vec<f64>, ExperimentError> {
        let mut src = GaussianSource::new(d, scale, cfg.solver.seed.wrapping_add(10 + k));
        let mut pts = Vec::with_capacity(sc.n_particles * d);
        for _ in 0..sc.n_particles {
            let mut x = src.sample();
            prepared
                .apply(&mut x)
                .map_err(|e| ExperimentError::Numerical { context: "flow audit".into(), message: e.to_string() })?;
            pts.extend(x);
        }
        Ok(pts)
    };
    let (a, b) = (start(0)?, start(1)?);
    let rep = discrete_flow_monotonicity(&sc, c, op, a, b).map_err(ExperimentError::solver("flow audit"))?;
    Ok(rep.min_inner)
}
