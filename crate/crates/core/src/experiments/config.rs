use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::calculus::TestFunction;
use crate::coefficients::{Catalog, CoefficientSet, Coefficients, Modulus};
use crate::monotone::MonotoneOperator;
use crate::noise::{JumpLaw, MarkLaw};
use crate::solver::{InitialCondition, Scheme, SolverConfig};
use crate::stability::LyapunovBounds;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentSpec,
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemBlock {
    pub operator: MonotoneOperator,
    pub coefficients: Catalog,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averaged: Option<Catalog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_law: Option<JumpLawBlock>,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Modulus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Modulus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpLawBlock {
    pub rate: f64,
    #[serde(default = "unit")]
    pub alpha: f64,
    #[serde(default = "uniform_ball")]
    pub mark_law: MarkLaw,
}

fn unit() -> f64 {
    1.0
}

fn uniform_ball() -> MarkLaw {
    MarkLaw::UniformBall
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverBlock {
    pub n_particles: usize,
    pub step: f64,
    pub horizon: f64,
    pub epsilon: Vec<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub initial: InitialCondition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Averaging,
    Stability,
    ItoCheck,
    Audits,
}

impl ExperimentKind {
    pub const NAMES: [&'static str; 5] = ["simulate", "averaging", "stability", "ito_check", "audits"];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Simulate,
    Averaging { chebyshev_delta: f64 },
    Stability(StabilitySpec),
    ItoCheck(ItoSpec),
    Audits(AuditSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentSpec::Simulate => ExperimentKind::Simulate,
            ExperimentSpec::Averaging { .. } => ExperimentKind::Averaging,
            ExperimentSpec::Stability(_) => ExperimentKind::Stability,
            ExperimentSpec::ItoCheck(_) => ExperimentKind::ItoCheck,
            ExperimentSpec::Audits(_) => ExperimentKind::Audits,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Exponential,
    Ultimate,
    AlmostSure,
    Lyapunov,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySpec {
    pub criteria: Vec<Criterion>,
    /// Decay rate of the exponential envelope and of the Lyapunov audit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `a₂/a₁` in the exponential envelope.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    pub m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<TestFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<LyapunovBounds>,
    /// Audit every this many steps.
    pub audit_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItoSpec {
    pub function: TestFunction,
    pub jump_marks: usize,
    pub eta_nodes: usize,
    /// Rerun at half the step and report the residual ratio.
    pub compare_halved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSpec {
    pub samples: usize,
    pub lambda: f64,
    /// Standard deviation of the Gaussian sample points.
    pub scale: f64,
    /// Averaging window for the time-average defect.
    pub t1: f64,
    pub n_quad: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputBlock {
    pub directory: String,
    pub retain_snapshots: bool,
}

/// One schema violation, located by a dotted path into the document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.path, e.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.path.contains(needle) || e.message.contains(needle))
    }
}

struct Walker {
    issues: Vec<ConfigIssue>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walker {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), message: message.into() });
    }

    fn table<'v>(&mut self, parent: &'v Table, key: &str, path: &str, required: bool) -> Option<&'v Table> {
        match parent.get(key) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.issue(join(path, key), "expected a table");
                None
            }
            None => {
                if required {
                    self.issue(join(path, key), "missing required key");
                }
                None
            }
        }
    }

    fn opt<T: DeserializeOwned>(&mut self, t: &Table, key: &str, path: &str) -> Option<T> {
        let v = t.get(key)?;
        match v.clone().try_into::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                let msg = e.to_string();
                self.issue(join(path, key), msg.trim().to_string());
                None
            }
        }
    }

    fn req<T: DeserializeOwned>(&mut self, t: &Table, key: &str, path: &str) -> Option<T> {
        if !t.contains_key(key) {
            self.issue(join(path, key), "missing required key");
            return None;
        }
        self.opt(t, key, path)
    }

    fn or<T: DeserializeOwned>(&mut self, t: &Table, key: &str, path: &str, default: T) -> Option<T> {
        if t.contains_key(key) {
            self.opt(t, key, path)
        } else {
            Some(default)
        }
    }

    fn unknown(&mut self, t: &Table, allowed: &[&str], path: &str) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.issue(join(path, k), format!("unknown key; expected one of {}", allowed.join(", ")));
            }
        }
    }
}

/// Parses and validates a TOML experiment description, reporting every
/// violation found rather than stopping at the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigIssue { path: "<document>".into(), message: e.to_string().trim().to_string() }])
    })?;
    let mut w = Walker { issues: Vec::new() };
    w.unknown(&doc, &["system", "solver", "experiment", "output"], "");
    let system = w.table(&doc, "system", "", true).and_then(|t| system_block(&mut w, t));
    let solver = w.table(&doc, "solver", "", true).and_then(|t| solver_block(&mut w, t));
    let experiment = w.table(&doc, "experiment", "", true).and_then(|t| experiment_block(&mut w, t));
    let output = match w.table(&doc, "output", "", false) {
        Some(t) => output_block(&mut w, t),
        None => Some(OutputBlock { directory: "out".into(), retain_snapshots: false }),
    };
    match (system, solver, experiment, output) {
        (Some(system), Some(solver), Some(experiment), Some(output)) if w.issues.is_empty() => {
            let cfg = ExperimentConfig { system, solver, experiment, output };
            cross_check(&mut w, &cfg);
            if w.issues.is_empty() {
                Ok(cfg)
            } else {
                Err(ConfigErrors(w.issues))
            }
        }
        _ => Err(ConfigErrors(w.issues)),
    }
}

fn system_block(w: &mut Walker, t: &Table) -> Option<SystemBlock> {
    let p = "system";
    w.unknown(t, &["operator", "coefficients", "averaged", "jump_law", "beta", "kappa", "phi", "l1", "l2"], p);
    let operator = w.or(t, "operator", p, MonotoneOperator::Zero);
    let coefficients = w.req::<Catalog>(t, "coefficients", p);
    let averaged = w.opt::<Catalog>(t, "averaged", p);
    let jump_law = w.opt::<JumpLawBlock>(t, "jump_law", p);
    let beta = w.or(t, "beta", p, 1.0);
    let kappa = w.opt::<Modulus>(t, "kappa", p);
    let phi = w.opt::<Modulus>(t, "phi", p);
    let l1 = w.opt::<f64>(t, "l1", p);
    let l2 = w.opt::<f64>(t, "l2", p);
    if t.contains_key("averaged") && averaged.is_none()
        || t.contains_key("jump_law") && jump_law.is_none()
        || t.contains_key("kappa") && kappa.is_none()
        || t.contains_key("phi") && phi.is_none()
        || t.contains_key("l1") && l1.is_none()
        || t.contains_key("l2") && l2.is_none()
    {
        return None;
    }
    Some(SystemBlock {
        operator: operator?,
        coefficients: coefficients?,
        averaged,
        jump_law,
        beta: beta?,
        kappa,
        phi,
        l1,
        l2,
    })
}

fn solver_block(w: &mut Walker, t: &Table) -> Option<SolverBlock> {
    let p = "solver";
    w.unknown(t, &["n_particles", "step", "horizon", "epsilon", "scheme", "seed", "initial"], p);
    let n_particles = w.req::<usize>(t, "n_particles", p);
    let step = w.req::<f64>(t, "step", p);
    let horizon = w.req::<f64>(t, "horizon", p);
    let epsilon = match t.get("epsilon") {
        Some(Value::Float(_)) | Some(Value::Integer(_)) => w.opt::<f64>(t, "epsilon", p).map(|e| vec![e]),
        Some(_) => w.opt::<Vec<f64>>(t, "epsilon", p),
        None => Some(vec![1.0]),
    };
    let scheme = w.or(t, "scheme", p, Scheme::ResolventSplit);
    let seed = w.or(t, "seed", p, 0u64);
    let initial = w.req::<InitialCondition>(t, "initial", p);
    Some(SolverBlock {
        n_particles: n_particles?,
        step: step?,
        horizon: horizon?,
        epsilon: epsilon?,
        scheme: scheme?,
        seed: seed?,
        initial: initial?,
    })
}

fn experiment_block(w: &mut Walker, t: &Table) -> Option<ExperimentSpec> {
    let p = "experiment";
    let kind: ExperimentKind = match t.get("kind") {
        None => {
            w.issue("experiment.kind", format!("missing required key; expected one of {}", ExperimentKind::NAMES.join(", ")));
            return None;
        }
        Some(_) => match w.opt::<ExperimentKind>(t, "kind", p) {
            Some(k) => k,
            None => return None,
        },
    };
    match kind {
        ExperimentKind::Simulate => {
            w.unknown(t, &["kind"], p);
            Some(ExperimentSpec::Simulate)
        }
        ExperimentKind::Averaging => {
            w.unknown(t, &["kind", "chebyshev_delta"], p);
            let chebyshev_delta = w.or(t, "chebyshev_delta", p, 0.1)?;
            Some(ExperimentSpec::Averaging { chebyshev_delta })
        }
        ExperimentKind::Stability => {
            w.unknown(
                t,
                &[
                    "kind", "criteria", "alpha", "ratio", "fit_window", "m", "lambda", "w", "delta", "t_tail",
                    "lyapunov", "bounds", "audit_every",
                ],
                p,
            );
            let criteria = w.or(t, "criteria", p, vec![Criterion::Exponential, Criterion::Ultimate, Criterion::AlmostSure]);
            let alpha = w.opt(t, "alpha", p);
            let ratio = w.or(t, "ratio", p, 1.0);
            let fit_window = w.opt(t, "fit_window", p);
            let m = w.or(t, "m", p, 1.0);
            let lambda = w.opt(t, "lambda", p);
            let wv = w.opt(t, "w", p);
            let delta = w.or(t, "delta", p, 1e-3);
            let t_tail = w.opt(t, "t_tail", p);
            let lyapunov = w.opt(t, "lyapunov", p);
            let bounds = w.opt(t, "bounds", p);
            let audit_every = w.or(t, "audit_every", p, 50usize);
            Some(ExperimentSpec::Stability(StabilitySpec {
                criteria: criteria?,
                alpha,
                ratio: ratio?,
                fit_window,
                m: m?,
                lambda,
                w: wv,
                delta: delta?,
                t_tail,
                lyapunov,
                bounds,
                audit_every: audit_every?,
            }))
        }
        ExperimentKind::ItoCheck => {
            w.unknown(t, &["kind", "function", "jump_marks", "eta_nodes", "compare_halved"], p);
            let function = w.req(t, "function", p);
            let jump_marks = w.or(t, "jump_marks", p, 32usize);
            let eta_nodes = w.or(t, "eta_nodes", p, 8usize);
            let compare_halved = w.or(t, "compare_halved", p, false);
            Some(ExperimentSpec::ItoCheck(ItoSpec {
                function: function?,
                jump_marks: jump_marks?,
                eta_nodes: eta_nodes?,
                compare_halved: compare_halved?,
            }))
        }
        ExperimentKind::Audits => {
            w.unknown(t, &["kind", "samples", "lambda", "scale", "t1", "n_quad"], p);
            let samples = w.or(t, "samples", p, 1000usize);
            let lambda = w.or(t, "lambda", p, 0.5);
            let scale = w.or(t, "scale", p, 2.0);
            let t1 = w.or(t, "t1", p, 2.0 * std::f64::consts::PI);
            let n_quad = w.or(t, "n_quad", p, 1000usize);
            Some(ExperimentSpec::Audits(AuditSpec {
                samples: samples?,
                lambda: lambda?,
                scale: scale?,
                t1: t1?,
                n_quad: n_quad?,
            }))
        }
    }
}

fn output_block(w: &mut Walker, t: &Table) -> Option<OutputBlock> {
    let p = "output";
    w.unknown(t, &["directory", "retain_snapshots"], p);
    let directory = w.or(t, "directory", p, "out".to_string());
    let retain_snapshots = w.or(t, "retain_snapshots", p, false);
    Some(OutputBlock { directory: directory?, retain_snapshots: retain_snapshots? })
}

/// Semantic checks that need more than one block.
fn cross_check(w: &mut Walker, cfg: &ExperimentConfig) {
    let sys = &cfg.system;
    if let Err(e) = sys.coefficients.validate() {
        w.issue("system.coefficients", e.to_string());
    }
    let d = sys.coefficients.dim();
    if let Err(e) = sys.operator.validate() {
        w.issue("system.operator", e.to_string());
    }
    if let Some(od) = sys.operator.dim() {
        if od != d {
            w.issue("system.operator", format!("operator acts on R^{od} but the coefficients on R^{d}"));
        }
    }
    if let Some(avg) = &sys.averaged {
        if let Err(e) = avg.validate() {
            w.issue("system.averaged", e.to_string());
        }
        if avg.dim() != d {
            w.issue("system.averaged", "averaged coefficients differ in dimension");
        }
    }
    if let Err(e) = cfg.jump_law() {
        w.issue("system.jump_law", e);
    }
    for (key, m) in [("kappa", &sys.kappa), ("phi", &sys.phi)] {
        if let Some(m) = m {
            if let Err(e) = m.validate() {
                w.issue(join("system", key), e.to_string());
            }
        }
    }
    for (key, v) in [("beta", Some(sys.beta)), ("l1", sys.l1), ("l2", sys.l2)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                w.issue(join("system", key), format!("must be positive, got {v}"));
            }
        }
    }

    let s = &cfg.solver;
    if s.initial.dim() != d {
        w.issue("solver.initial", format!("initial condition has dimension {} but the state has {d}", s.initial.dim()));
    }
    if s.epsilon.is_empty() {
        w.issue("solver.epsilon", "epsilon list is empty");
    }
    for (i, &e) in s.epsilon.iter().enumerate() {
        if let Err(err) = cfg.solver_config(e).validate() {
            let msg = err.to_string();
            let path = if msg.contains("epsilon") { format!("solver.epsilon[{i}]") } else { "solver".into() };
            if !w.issues.iter().any(|x| x.path == path && x.message == msg) {
                w.issue(path, msg);
            }
        }
    }

    match &cfg.experiment {
        ExperimentSpec::Averaging { chebyshev_delta } => {
            if sys.averaged.is_none() {
                w.issue("system.averaged", "averaging experiments need averaged coefficients");
            }
            if s.epsilon.windows(2).any(|p| p[0] <= p[1]) {
                w.issue("solver.epsilon", "epsilon list must be strictly decreasing");
            }
            if !(*chebyshev_delta > 0.0) {
                w.issue("experiment.chebyshev_delta", "must be positive");
            }
        }
        ExperimentSpec::Stability(st) => {
            let p = "experiment";
            let needs = |c: Criterion| st.criteria.contains(&c);
            if (needs(Criterion::Exponential) || needs(Criterion::Lyapunov)) && st.alpha.is_none() {
                w.issue(join(p, "alpha"), "required by the exponential and lyapunov criteria");
            }
            if let Some(a) = st.alpha {
                if !(a > 0.0) {
                    w.issue(join(p, "alpha"), "must be positive");
                }
            }
            if needs(Criterion::Ultimate) {
                if st.lambda.is_none() {
                    w.issue(join(p, "lambda"), "required by the ultimate criterion");
                }
                if st.w.is_none() {
                    w.issue(join(p, "w"), "required by the ultimate criterion");
                }
            }
            for (key, v) in [("m", Some(st.m)), ("lambda", st.lambda), ("w", st.w), ("ratio", Some(st.ratio))] {
                if let Some(v) = v {
                    if !(v >= 0.0) {
                        w.issue(join(p, key), "must be nonnegative");
                    }
                }
            }
            if needs(Criterion::AlmostSure) {
                if !s.initial.is_deterministic() {
                    w.issue("solver.initial", "the almost_sure criterion needs a non-random initial condition");
                }
                if !(st.delta > 0.0) {
                    w.issue(join(p, "delta"), "must be positive");
                }
                if let Some(tt) = st.t_tail {
                    if !(0.0..=s.horizon).contains(&tt) {
                        w.issue(join(p, "t_tail"), "must lie within the horizon");
                    }
                }
            }
            if needs(Criterion::Lyapunov) {
                if st.lyapunov.is_none() {
                    w.issue(join(p, "lyapunov"), "required by the lyapunov criterion");
                }
                if st.bounds.is_none() {
                    w.issue(join(p, "bounds"), "required by the lyapunov criterion");
                }
            }
            if let Some([a, b]) = st.fit_window {
                if !(a < b) {
                    w.issue(join(p, "fit_window"), "window must be increasing");
                }
            }
            if st.audit_every == 0 {
                w.issue(join(p, "audit_every"), "must be at least 1");
            }
        }
        ExperimentSpec::ItoCheck(it) => {
            if it.eta_nodes == 0 {
                w.issue("experiment.eta_nodes", "must be at least 1");
            }
            if s.epsilon.len() != 1 {
                w.issue("solver.epsilon", "ito_check runs a single epsilon");
            }
        }
        ExperimentSpec::Audits(a) => {
            if a.samples == 0 {
                w.issue("experiment.samples", "must be at least 1");
            }
            if !(a.lambda > 0.0) {
                w.issue("experiment.lambda", "must be positive");
            }
        }
        ExperimentSpec::Simulate => {}
    }
}

impl ExperimentConfig {
    pub fn solver_config(&self, epsilon: f64) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(s.n_particles, s.step, s.horizon, s.initial.clone());
        cfg.scheme = s.scheme.clone();
        cfg.epsilon = epsilon;
        cfg.seed = s.seed;
        cfg
    }

    pub fn jump_law(&self) -> Result<Option<JumpLaw>, String> {
        match &self.system.jump_law {
            None => Ok(None),
            Some(j) => JumpLaw::new(j.rate, j.alpha, self.system.coefficients.mark_dim(), j.mark_law.clone()).map(Some),
        }
    }

    fn build(&self, entry: &Catalog) -> Result<CoefficientSet, String> {
        let mut c = CoefficientSet::from_catalog(entry.clone(), self.jump_law()?).map_err(|e| e.to_string())?;
        c.beta = self.system.beta;
        if let Some(k) = self.system.kappa {
            c.kappa = k;
        }
        if let Some(p) = self.system.phi {
            c.phi = p;
        }
        if let Some(l) = self.system.l1 {
            c.l1 = l;
        }
        if let Some(l) = self.system.l2 {
            c.l2 = l;
        }
        Ok(c)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet, String> {
        self.build(&self.system.coefficients)
    }

    pub fn averaged(&self) -> Result<Option<CoefficientSet>, String> {
        self.system.averaged.as_ref().map(|a| self.build(a)).transpose()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
