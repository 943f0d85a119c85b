//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use mvlab::calculus::{bihari_bound, GeneratorOptions, ItoAccumulator, ItoObserver, TestFunction};
use mvlab::coefficients::{Catalog, CoefficientSet, Modulation, Modulus};
use mvlab::measure::EmpiricalMeasure;
use mvlab::monotone::{ConvexFunction, ConvexSet, MonotoneOperator};
use mvlab::noise::{verify_isometry, GaussianSource, JumpLaw, MarkLaw, PointSource};
use mvlab::solver::{
    discrete_flow_monotonicity, simulate, simulate_coupled, simulate_observed, InitialCondition, ParticleEnsemble,
    SolverConfig, StepObserver,
};
use mvlab::stability::{audit_lyapunov_conditions, check_exponential_envelope, LyapunovBounds, check_ultimate_boundedness, fit_exponential_decay};
use mvlab::stats::MeanSe;

struct Outcome {
    passed: bool,
    detail: String,
}

fn lmf(a: f64, c: f64, sigma: f64, gamma: f64, modulation: Modulation) -> Catalog {
    Catalog::LinearMeanField { dim: 1, a, c, sigma, gamma, modulation }
}

fn set(cat: Catalog, law: Option<JumpLaw>) -> CoefficientSet {
    CoefficientSet::from_catalog(cat, law).expect("catalog entry")
}

fn uniform_marks(rate: f64) -> JumpLaw {
    JumpLaw::new(rate, 1.0, 1, MarkLaw::UniformBall).expect("jump law")
}

fn constant(x: f64) -> InitialCondition {
    InitialCondition::Constant { value: vec![x] }
}

fn c1_mean_field_mean() -> Outcome {
    let cfg = SolverConfig::new(10_000, 1e-3, 1.0, constant(1.0));
    let c = set(lmf(1.0, 0.5, 0.0, 0.0, Modulation::None), None);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let traj = pool.install(|| simulate(&cfg, &c, &MonotoneOperator::Zero)).expect("run");
    let secs = start.elapsed().as_secs_f64();
    let m = traj.terminal_mean(0).mean;
    let want = (-0.5f64).exp();
    let rel = (m - want).abs() / want;
    Outcome {
        passed: rel <= 0.01,
        detail: format!("mean(X_1) = {m:.6}, exp(-1/2) = {want:.6}, rel err {rel:.2e} (tol 1e-2), {secs:.1} s single-threaded"),
    }
}

/// Smallest state coordinate seen at any step.
struct MinState(f64);

impl StepObserver for MinState {
    fn start(&mut self, ens: &ParticleEnsemble) -> Result<(), String> {
        self.0 = self.0.min(ens.states().iter().copied().fold(f64::INFINITY, f64::min));
        Ok(())
    }

    fn after_step(&mut self, _prev: &EmpiricalMeasure, ens: &ParticleEnsemble) -> Result<(), String> {
        self.start(ens)
    }
}

fn c2_reflected_bm() -> Outcome {
    let mut cfg = SolverConfig::new(100_000, 1e-3, 1.0, constant(0.0));
    cfg.seed = 2;
    let c = set(lmf(0.0, 0.0, 1.0, 0.0, Modulation::None), None);
    let op = MonotoneOperator::normal_cone(ConvexSet::nonnegative(1, 0)).unwrap();
    let mut min = MinState(f64::INFINITY);
    let start = Instant::now();
    let traj = simulate_observed(&cfg, &c, &op, &mut min).expect("run");
    let secs = start.elapsed().as_secs_f64();
    let m = traj.terminal_mean(0);
    let want = (2.0 / PI).sqrt();
    let z = m.z_score(want);
    Outcome {
        passed: z.abs() <= 3.0 && min.0 >= 0.0,
        detail: format!(
            "mean(X_1) = {:.5} ± {:.5}, sqrt(2/pi) = {want:.5}, z = {z:.2} (tol 3), min state {:.3e}, {secs:.1} s",
            m.mean, m.se, min.0
        ),
    }
}

fn c3_jump_isometry() -> Outcome {
    let law = uniform_marks(1.0);
    let rep = verify_isometry(&law, &|_, u: &[f64]| vec![u[0].abs()], 1.0, 10_000, 3);
    let z = rep.lhs.z_score(1.0 / 3.0);
    Outcome {
        passed: z.abs() <= 3.0,
        detail: format!("MC = {:.5} ± {:.5}, 1/3, z = {z:.2} (tol 3)", rep.lhs.mean, rep.lhs.se),
    }
}

fn sweep(gamma: f64, law: Option<JumpLaw>, seed: u64) -> Vec<(f64, MeanSe)> {
    let full = set(lmf(1.0, 1.0, 0.1, gamma, Modulation::Sin2), law.clone());
    let avg = set(lmf(1.0, 1.0, 0.1, gamma, Modulation::Half), law);
    [0.2, 0.1, 0.05, 0.01]
        .iter()
        .map(|&eps| {
            let mut cfg = SolverConfig::new(
                10_000,
                1e-3,
                1.0,
                InitialCondition::Gaussian { mean: vec![1.0], std: 0.5 },
            );
            cfg.epsilon = eps;
            cfg.seed = seed;
            let rec = simulate_coupled(&cfg, &full, &avg, &MonotoneOperator::Zero).expect("coupled run");
            (eps, *rec.sup_distance.last().unwrap())
        })
        .collect()
}

fn c4_averaging() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, rows) in [("no jumps", sweep(0.0, None, 4)), ("jumps", sweep(0.1, Some(uniform_marks(1.0)), 5))] {
        let decreasing = rows.windows(2).all(|w| w[1].1.mean < w[0].1.mean);
        let (first, last) = (rows[0].1, rows[rows.len() - 1].1);
        let separated = last.ci95().1 < first.ci95().0;
        let ratio = last.mean / first.mean;
        ok &= decreasing && separated && ratio <= 0.1;
        let ds: Vec<String> = rows.iter().map(|(e, d)| format!("{e}:{:.3e}", d.mean)).collect();
        parts.push(format!(
            "{label}: D(T) [{}], decreasing {decreasing}, CIs separated {separated}, ratio {ratio:.2e} (tol 0.1)",
            ds.join(" ")
        ));
    }
    Outcome { passed: ok, detail: parts.join("; ") }
}

fn ito_run(step: f64, seed: u64) -> mvlab::calculus::ItoReport {
    let mut cfg = SolverConfig::new(10_000, step, 1.0, constant(1.0));
    cfg.seed = seed;
    let c = set(lmf(1.0, 0.5, 0.0, 0.1, Modulation::None), Some(uniform_marks(1.0)));
    let h = TestFunction::MeasureQuadratic;
    let opts = GeneratorOptions { seed, ..Default::default() };
    let acc = ItoAccumulator::new(&c, &h, opts, step).unwrap();
    let mut obs = ItoObserver { acc };
    simulate_observed(&cfg, &c, &MonotoneOperator::Zero, &mut obs).expect("run");
    obs.acc.report()
}

fn c5_ito_residual() -> Outcome {
    let fine = ito_run(1e-3, 7);
    let coarse = ito_run(0.05, 7);
    let half = ito_run(0.025, 7);
    let ratio = coarse.final_residual.abs() / half.final_residual.abs();
    Outcome {
        passed: fine.z.abs() <= 4.0 && ratio >= 1.5,
        detail: format!(
            "h=1e-3: R(T) = {:.3e}, z = {:.2} (tol 4); |R| at h=0.05 / h=0.025 = {:.3e} / {:.3e} = {ratio:.2} (tol 1.5)",
            fine.final_residual, fine.z, coarse.final_residual, half.final_residual
        ),
    }
}

fn c6_exponential() -> Outcome {
    let cfg = SolverConfig::new(10_000, 1e-3, 2.0, constant(1.0));
    let c = set(lmf(1.0, 0.25, 0.0, 0.0, Modulation::None), None);
    let traj = simulate(&cfg, &c, &MonotoneOperator::Zero).expect("run");
    let q: Vec<f64> = traj.mean_sq.iter().map(|m| m.mean).collect();
    let xi = q[0];
    let fit = fit_exponential_decay(&traj.times, &q, (0.5, 2.0), xi).expect("fit");
    let env = check_exponential_envelope(&traj.times, &traj.mean_sq, 1.0, 1.5, xi).unwrap();
    let rel = (fit.alpha - 1.5).abs() / 1.5;

    let mut small = SolverConfig::new(1_000, 1e-3, 2.0, constant(1.0));
    small.retain_snapshots = true;
    let snaps: Vec<_> =
        simulate(&small, &c, &MonotoneOperator::Zero).expect("run").snapshots.into_iter().step_by(50).collect();
    let audit = audit_lyapunov_conditions(
        &TestFunction::Quadratic,
        &c,
        1.5,
        &LyapunovBounds::Exponential { a1: 1.0, a2: 1.0 },
        &snaps,
        &GeneratorOptions::default(),
        true,
    )
    .expect("audit");
    Outcome {
        passed: rel <= 0.05 && env.passed && audit.passed(),
        detail: format!(
            "fitted alpha = {:.4} (rel err {rel:.2e}, tol 5e-2), envelope margin {:.3e} at t = {}, \
             Lyapunov generator margin {:.3e}, sandwich margins {:.1e}/{:.1e}",
            fit.alpha, env.worst_margin, env.worst_time, audit.generator_margin, audit.lower_margin, audit.upper_margin
        ),
    }
}

fn c7_ultimate() -> Outcome {
    let mut cfg = SolverConfig::new(10_000, 1e-3, 5.0, constant(1.0));
    cfg.seed = 7;
    let c = set(lmf(1.0, 0.0, 0.5, 0.0, Modulation::None), None);
    let traj = simulate(&cfg, &c, &MonotoneOperator::Zero).expect("run");
    let xi = traj.mean_sq[0].mean;
    let ult = check_ultimate_boundedness(&traj.times, &traj.mean_sq, 1.0, 2.0, 0.14, xi).unwrap();
    let exp = check_exponential_envelope(&traj.times, &traj.mean_sq, 1.0, 2.0, xi).unwrap();
    let tail = traj.mean_sq.last().unwrap();
    Outcome {
        passed: ult.passed && !exp.passed,
        detail: format!(
            "E|X_5|^2 = {:.4} ± {:.4} (stationary 0.125); ultimate margin {:.3e} (pass {}), exponential margin {:.3e} (pass {})",
            tail.mean, tail.se, ult.worst_margin, ult.passed, exp.worst_margin, exp.passed
        ),
    }
}

fn catalog() -> Vec<MonotoneOperator> {
    let ball = ConvexSet::ball(vec![0.2, -0.1], 1.5).unwrap();
    let half = ConvexSet::halfspace(vec![1.0, 0.5], -0.3).unwrap();
    vec![
        MonotoneOperator::Zero,
        MonotoneOperator::normal_cone(half.clone()).unwrap(),
        MonotoneOperator::normal_cone(ball.clone()).unwrap(),
        MonotoneOperator::normal_cone(ConvexSet::cube(vec![-1.0, -0.5], vec![1.0, 2.0]).unwrap()).unwrap(),
        MonotoneOperator::normal_cone(ConvexSet::intersection(vec![ball, half]).unwrap()).unwrap(),
        MonotoneOperator::subdifferential(ConvexFunction::L1Norm { weight: 0.7 }).unwrap(),
        MonotoneOperator::subdifferential(ConvexFunction::EuclideanNorm { weight: 1.2 }).unwrap(),
        MonotoneOperator::linear_psd(vec![vec![2.0, 1.0], vec![-1.0, 0.5]]).unwrap(),
    ]
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Classical RK4 for `u′ = v ψ(u)`.
fn rk4(c0: f64, v: f64, psi: impl Fn(f64) -> f64, t: f64, dt: f64) -> f64 {
    let n = (t / dt).round() as usize;
    let f = |u: f64| v * psi(u);
    let mut u = c0;
    for _ in 0..n {
        let k1 = f(u);
        let k2 = f(u + 0.5 * dt * k1);
        let k3 = f(u + 0.5 * dt * k2);
        let k4 = f(u + dt * k3);
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

fn c8_properties() -> Outcome {
    let mut fails = Vec::new();
    let mut src = GaussianSource::new(2, 3.0, 8);

    // Resolvent non-expansiveness and projection idempotence.
    let mut worst_expansion = f64::NEG_INFINITY;
    let mut worst_idem = 0.0f64;
    let mut worst_member = 0.0f64;
    for op in catalog() {
        for k in 0..500 {
            let (x, y) = (src.sample(), src.sample());
            let lambda = [0.01, 0.3, 1.0, 4.0][k % 4];
            let (jx, jy) = (op.resolvent(lambda, &x).unwrap(), op.resolvent(lambda, &y).unwrap());
            worst_expansion = worst_expansion.max(dist(&jx, &jy) - dist(&x, &y));
            if let MonotoneOperator::NormalCone { set } = &op {
                let p = set.project(&x).unwrap();
                worst_member = worst_member.max(set.violation(&p));
                worst_idem = worst_idem.max(dist(&p, &set.project(&p).unwrap()));
            }
        }
    }
    if worst_expansion > 1e-12 || worst_idem > 1e-12 || worst_member > 1e-10 {
        fails.push("resolvent/projection");
    }

    // Discrete pairing ⟨ΔX, ΔK⟩ across the catalog.
    let c = set(
        Catalog::LinearMeanField { dim: 2, a: 0.5, c: 0.3, sigma: 0.4, gamma: 0.2, modulation: Modulation::None },
        Some(JumpLaw::new(2.0, 1.0, 2, MarkLaw::UniformBall).unwrap()),
    );
    let mut worst_pair = f64::INFINITY;
    for op in catalog() {
        let mut cfg = SolverConfig::new(64, 0.01, 0.5, InitialCondition::Constant { value: vec![0.0; 2] });
        cfg.seed = 11;
        let start = |seed: u64| {
            let mut s = GaussianSource::new(2, 2.0, seed);
            (0..64).flat_map(|_| op.resolvent(1.0, &s.sample()).unwrap()).collect::<Vec<f64>>()
        };
        let rep = discrete_flow_monotonicity(&cfg, &c, &op, start(1), start(2)).unwrap();
        worst_pair = worst_pair.min(rep.min_inner);
    }
    if worst_pair < -1e-12 {
        fails.push("discrete pairing");
    }

    // Modulus concavity on a grid.
    let mut worst_concavity = f64::INFINITY;
    for m in [
        Modulus::Linear { l: 2.0 },
        Modulus::LogSpliced { delta: 0.1 },
        Modulus::LogSpliced { delta: 0.3 },
        Modulus::LogLogSpliced { delta: 0.1 },
    ] {
        let grid: Vec<f64> = (0..60).map(|k| 0.05 * k as f64).collect();
        for (i, &u) in grid.iter().enumerate() {
            for &w in &grid[i + 1..] {
                for lam in [0.25, 0.5, 0.75] {
                    let gap = m.eval(lam * u + (1.0 - lam) * w).unwrap()
                        - (lam * m.eval(u).unwrap() + (1.0 - lam) * m.eval(w).unwrap());
                    worst_concavity = worst_concavity.min(gap);
                }
            }
        }
    }
    if worst_concavity < -1e-12 {
        fails.push("modulus concavity");
    }

    // Bihari against Gronwall and against an RK4 solution of u′ = v ψ(u).
    let grid = [0.0, 0.5, 1.0, 2.0];
    let lin = bihari_bound(0.3, &|_| 1.5, &|u| 2.0 * u, &grid).unwrap();
    let gronwall = grid
        .iter()
        .zip(&lin)
        .map(|(t, b)| (b.finite().unwrap() - 0.3 * (3.0 * t).exp()).abs() / (0.3 * (3.0 * t).exp()))
        .fold(0.0, f64::max);
    let psi = Modulus::LogSpliced { delta: 0.1 };
    let b = bihari_bound(0.01, &|_| 1.0, &|u| psi.eval(u).unwrap(), &[1.0]).unwrap()[0].finite().unwrap();
    let oracle = rk4(0.01, 1.0, |u| psi.eval(u).unwrap(), 1.0, 1e-5);
    let rk_rel = (b - oracle).abs() / oracle;
    if gronwall > 1e-8 || rk_rel > 1e-4 {
        fails.push("bihari");
    }

    // K-reconstruction and bit-identical reruns across thread counts.
    let mut cfg = SolverConfig::new(500, 0.01, 1.0, InitialCondition::Gaussian { mean: vec![0.2, 0.2], std: 0.1 });
    cfg.seed = 12;
    let op = MonotoneOperator::normal_cone(ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(&cfg, &c, &op)).unwrap()
    };
    let (a, b3) = (run(1), run(3));
    let recon = a.max_reconstruction_error;
    let identical = a.final_ensemble.states().iter().zip(b3.final_ensemble.states()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.final_ensemble.k_accum() == b3.final_ensemble.k_accum();
    if recon > 1e-10 {
        fails.push("K reconstruction");
    }
    if !identical {
        fails.push("thread determinism");
    }

    Outcome {
        passed: fails.is_empty(),
        detail: format!(
            "expansion {worst_expansion:.1e} (1e-12), idempotence {worst_idem:.1e} (1e-12), membership {worst_member:.1e} (1e-10), \
             pairing min {worst_pair:.1e} (-1e-12), concavity min {worst_concavity:.1e} (-1e-12), \
             Gronwall rel {gronwall:.1e} (1e-8), RK4 rel {rk_rel:.1e} (1e-4), reconstruction {recon:.1e} (1e-10), \
             threads 1 vs 3 bit-identical {identical}{}",
            if fails.is_empty() { String::new() } else { format!("; failing: {}", fails.join(", ")) }
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("mean-field OU mean", c1_mean_field_mean),
        ("reflected Brownian motion", c2_reflected_bm),
        ("jump isometry", c3_jump_isometry),
        ("averaging sweep", c4_averaging),
        ("Ito residual", c5_ito_residual),
        ("exponential mean-square stability", c6_exponential),
        ("2-ultimate boundedness", c7_ultimate),
        ("property suites", c8_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let out = f();
        if !out.passed {
            failed += 1;
        }
        println!("criterion {} {:<36} {}  {}", i + 1, name, if out.passed { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
