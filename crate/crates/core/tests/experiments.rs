use std::fs;
use std::path::Path;
use std::process::Command;

use mvlab::experiments::*;

const MINIMAL: &str = r#"
[system]
coefficients = { name = "linear_mean_field", dim = 1, a = 1.0, c = 0.5, sigma = 0.2, gamma = 0.0 }

[solver]
n_particles = 200
step = 0.01
horizon = 0.5
initial = { kind = "constant", value = [1.0] }

[experiment]
kind = "simulate"
"#;

fn with_experiment(block: &str) -> String {
    let head = MINIMAL.split("[experiment]").next().unwrap();
    format!("{head}{block}")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.solver.epsilon, vec![1.0]);
    assert_eq!(cfg.solver.seed, 0);
    assert_eq!(cfg.system.operator, mvlab::monotone::MonotoneOperator::Zero);
    assert_eq!(cfg.system.beta, 1.0);
    assert_eq!(cfg.output.directory, "out");
    assert!(!cfg.output.retain_snapshots);
}

#[test]
fn indivisible_horizon_is_rejected() {
    let text = MINIMAL.replace("step = 0.01", "step = 0.3").replace("horizon = 0.5", "horizon = 1.0");
    let err = parse_config(&text).unwrap_err();
    assert!(err.mentions("T not an integer multiple of h"), "{err}");
}

#[test]
fn unknown_operator_lists_valid_kinds() {
    let text = MINIMAL.replace("[system]\n", "[system]\noperator = { kind = \"polytope\" }\n");
    let err = parse_config(&text).unwrap_err();
    let issue = err.0.iter().find(|e| e.path == "system.operator").expect("operator issue");
    assert!(issue.message.contains("polytope"), "{}", issue.message);
    assert!(issue.message.contains("normal_cone") && issue.message.contains("linear_psd"), "{}", issue.message);
}

#[test]
fn all_violations_are_reported() {
    let text = r#"
[system]
coefficients = { name = "quartic", dim = 1 }
colour = "red"

[solver]
step = 0.01
horizon = 1.0
initial = { kind = "constant", value = [0.0] }

[experiment]
kind = "simulate"
"#;
    let err = parse_config(text).unwrap_err();
    let paths: Vec<&str> = err.0.iter().map(|e| e.path.as_str()).collect();
    assert!(paths.contains(&"system.coefficients"), "{paths:?}");
    assert!(paths.contains(&"system.colour"), "{paths:?}");
    assert!(paths.contains(&"solver.n_particles"), "{paths:?}");
}

#[test]
fn averaging_needs_averaged_coefficients_and_descending_epsilon() {
    let text = with_experiment("[experiment]\nkind = \"averaging\"\n").replace(
        "horizon = 0.5",
        "horizon = 0.5\nepsilon = [0.1, 0.2]",
    );
    let err = parse_config(&text).unwrap_err();
    assert!(err.mentions("system.averaged"), "{err}");
    assert!(err.mentions("strictly decreasing"), "{err}");
}

#[test]
fn almost_sure_needs_a_deterministic_start() {
    let text = with_experiment("[experiment]\nkind = \"stability\"\ncriteria = [\"almost_sure\"]\n")
        .replace("{ kind = \"constant\", value = [1.0] }", "{ kind = \"gaussian\", mean = [1.0], std = 0.1 }");
    let err = parse_config(&text).unwrap_err();
    assert!(err.mentions("non-random"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn csv_headers_are_pinned() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(MINIMAL).unwrap();
    cfg.output.retain_snapshots = true;
    run_experiment(&cfg, tmp.path()).unwrap();
    assert_eq!(header(&tmp.path().join("trajectory.csv")), "epsilon,t,mean_sq,mean_sq_se,sup_mean_sq,k_variation,domain_violation");
    assert_eq!(header(&tmp.path().join("means.csv")), "epsilon,t,component,mean,se");
    assert_eq!(header(&tmp.path().join("snapshots.csv")), "epsilon,t,particle,component,value");

    let text = with_experiment("[experiment]\nkind = \"averaging\"\n")
        .replace("horizon = 0.5", "horizon = 0.5\nepsilon = [0.5, 0.1]")
        .replace(
            "[solver]",
            "averaged = { name = \"linear_mean_field\", dim = 1, a = 0.5, c = 0.5, sigma = 0.2, gamma = 0.0 }\n[solver]",
        );
    let dir = tmp.path().join("avg");
    run_experiment(&parse_config(&text).unwrap(), &dir).unwrap();
    assert_eq!(header(&dir.join("averaging_summary.csv")), "epsilon,d_t,se,ci_low,ci_high,chebyshev_delta,chebyshev_bound");
    assert_eq!(header(&dir.join("averaging_series.csv")), "epsilon,t,d,se");
    assert_eq!(header(&dir.join("verdicts.csv")), "criterion,parameters,margin,verdict");

    let text = with_experiment(
        "[experiment]\nkind = \"stability\"\ncriteria = [\"exponential\"]\nalpha = 0.1\nratio = 10.0\n",
    );
    let dir = tmp.path().join("stab");
    run_experiment(&parse_config(&text).unwrap(), &dir).unwrap();
    assert_eq!(header(&dir.join("stability_series.csv")), "t,mean_sq,mean_sq_se");

    let text = with_experiment("[experiment]\nkind = \"ito_check\"\nfunction = { name = \"quadratic\" }\n");
    let dir = tmp.path().join("ito");
    run_experiment(&parse_config(&text).unwrap(), &dir).unwrap();
    assert_eq!(header(&dir.join("ito_residual.csv")), "t,residual");

    let text = with_experiment("[experiment]\nkind = \"audits\"\nsamples = 50\n");
    let dir = tmp.path().join("audits");
    run_experiment(&parse_config(&text).unwrap(), &dir).unwrap();
    assert_eq!(header(&dir.join("audits.csv")), "audit,quantity,value,verdict");
}

#[test]
fn identical_systems_have_zero_averaging_distance() {
    let text = with_experiment("[experiment]\nkind = \"averaging\"\n")
        .replace("horizon = 0.5", "horizon = 0.5\nepsilon = [0.2, 0.1, 0.05]")
        .replace(
            "[solver]",
            "averaged = { name = \"linear_mean_field\", dim = 1, a = 1.0, c = 0.5, sigma = 0.2, gamma = 0.0 }\n[solver]",
        );
    let tmp = tempfile::tempdir().unwrap();
    let rep = run_experiment(&parse_config(&text).unwrap(), tmp.path()).unwrap();
    for row in rep.summary["rows"].as_array().unwrap() {
        assert_eq!(row["d_t"]["mean"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let text = with_experiment("[experiment]\nkind = \"averaging\"\n")
        .replace("horizon = 0.5", "horizon = 0.5\nepsilon = [0.5, 0.1]")
        .replace("gamma = 0.0 }", "gamma = 0.2 }\njump_law = { rate = 2.0 }")
        .replace(
            "[solver]",
            "averaged = { name = \"linear_mean_field\", dim = 1, a = 0.5, c = 0.5, sigma = 0.2, gamma = 0.2 }\n[solver]",
        );
    let cfg = parse_config(&text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: usize, name: &str| {
        let dir = tmp.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg, &dir)).unwrap();
        ["averaging_summary.csv", "averaging_series.csv", "report.json"]
            .map(|f| fs::read(dir.join(f)).unwrap())
    };
    let a = run(1, "a");
    let b = run(1, "b");
    let c = run(4, "c");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn stability_battery_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let contractive = r#"
[system]
coefficients = { name = "linear_mean_field", dim = 1, a = 1.0, c = 0.0, sigma = 0.0, gamma = 0.0 }
[solver]
n_particles = 100
step = 0.01
horizon = 10.0
initial = { kind = "constant", value = [1.0] }
[experiment]
kind = "stability"
criteria = ["exponential", "ultimate", "almost_sure"]
alpha = 2.0
lambda = 2.0
w = 0.0
delta = 0.01
"#;
    let rep = run_experiment(&parse_config(contractive).unwrap(), &tmp.path().join("c")).unwrap();
    assert_eq!(rep.verdicts.len(), 3);
    assert!(rep.passed(), "{:?}", rep.verdicts);

    let noisy = contractive.replace("sigma = 0.0", "sigma = 0.5").replace("w = 0.0", "w = 0.14")
        .replace("n_particles = 100", "n_particles = 4000")
        .replace("criteria = [\"exponential\", \"ultimate\", \"almost_sure\"]", "criteria = [\"exponential\", \"ultimate\"]");
    let rep = run_experiment(&parse_config(&noisy).unwrap(), &tmp.path().join("n")).unwrap();
    let get = |name: &str| rep.verdicts.iter().find(|v| v.criterion == name).unwrap().passed;
    assert!(!get("exponential"));
    assert!(get("ultimate"));

    let empty = contractive.replace("criteria = [\"exponential\", \"ultimate\", \"almost_sure\"]", "criteria = []");
    let rep = run_experiment(&parse_config(&empty).unwrap(), &tmp.path().join("e")).unwrap();
    assert!(rep.verdicts.is_empty());
    assert!(rep.passed());
}

fn cli(args: &[&str], env_out: Option<&Path>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvlab"));
    cmd.args(args).env_remove("MVLAB_OUT");
    if let Some(p) = env_out {
        cmd.env("MVLAB_OUT", p);
    }
    let out = cmd.output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, body).unwrap();
        p.display().to_string()
    };
    let good = write("good.toml", MINIMAL);
    let out = tmp.path().join("run");
    let (code, _) = cli(&["simulate", "--config", &good, "--out", out.to_str().unwrap(), "--threads", "2"], None);
    assert_eq!(code, EXIT_OK);
    assert!(out.join("report.json").exists());

    let env_dir = tmp.path().join("from_env");
    let (code, _) = cli(&["simulate", "--config", &good, "--seed", "9"], Some(&env_dir));
    assert_eq!(code, EXIT_OK);
    let report = fs::read_to_string(env_dir.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 9"));

    let bad = write("bad.toml", &MINIMAL.replace("step = 0.01", "step = 0.3"));
    let (code, text) = cli(&["simulate", "--config", &bad, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, EXIT_CONFIG);
    assert!(text.contains("T not an integer multiple of h"), "{text}");

    let (code, _) = cli(&["averaging", "--config", &good, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, EXIT_CONFIG);

    let explode = write(
        "explode.toml",
        &MINIMAL.replace("a = 1.0, c = 0.5", "a = -400.0, c = 0.0").replace("horizon = 0.5", "horizon = 1.0"),
    );
    let (code, text) = cli(&["simulate", "--config", &explode, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, EXIT_BLOW_UP, "{text}");

    let failing = write(
        "failing.toml",
        &with_experiment("[experiment]\nkind = \"stability\"\ncriteria = [\"exponential\"]\nalpha = 50.0\n")
            .replace("sigma = 0.2", "sigma = 0.0"),
    );
    let (code, _) = cli(&["stability", "--config", &failing, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, EXIT_OK);
    let (code, text) = cli(&["stability", "--config", &failing, "--out", out.to_str().unwrap(), "--strict"], None);
    assert_eq!(code, EXIT_CRITERION, "{text}");
}
