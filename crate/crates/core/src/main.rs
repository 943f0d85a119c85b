use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvlab::experiments::{
    parse_config, run_experiment, ExperimentKind, EXIT_CONFIG, EXIT_CRITERION, EXIT_OK, EXIT_RUNTIME,
};

/// Interacting-particle experiments for multi-valued McKean-Vlasov SDEs.
#[derive(Parser)]
#[command(name = "mvlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the particle system and write grid statistics.
    Simulate(Common),
    /// Couple original and averaged systems over a list of epsilons.
    Averaging(Common),
    /// Fit decay rates and evaluate stability criteria.
    Stability(Common),
    /// Accumulate the Itô-formula residual along a run.
    ItoCheck(Common),
    /// Sampling audits of the operator and coefficients.
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to $MVLAB_OUT, then the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 when any criterion fails.
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Averaging(a) => (ExperimentKind::Averaging, a),
        Command::Stability(a) => (ExperimentKind::Stability, a),
        Command::ItoCheck(a) => (ExperimentKind::ItoCheck, a),
        Command::Audit(a) => (ExperimentKind::Audits, a),
    };
    ExitCode::from(run(kind, args) as u8)
}

fn run(kind: ExperimentKind, args: Common) -> i32 {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return EXIT_RUNTIME;
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => {
            eprintln!("error: invalid configuration {}", args.config.display());
            for e in &errs.0 {
                eprintln!("  {}: {}", e.path, e.message);
            }
            return EXIT_CONFIG;
        }
    };
    if cfg.experiment.kind() != kind {
        eprintln!(
            "error: experiment.kind: config describes `{}` but the `{}` subcommand was used",
            cfg.experiment.kind().name(),
            kind.name()
        );
        return EXIT_CONFIG;
    }
    if let Some(s) = args.seed {
        cfg.solver.seed = s;
    }
    let out = args
        .out
        .or_else(|| std::env::var_os("MVLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    match run_experiment(&cfg, &out) {
        Ok(report) => {
            for v in &report.verdicts {
                println!("{:<22} {:<6} margin={:<12.4e} {}", v.criterion, if v.passed { "PASS" } else { "FAIL" }, v.margin, v.parameters);
            }
            println!("wrote {} ({})", out.join("report.json").display(), report.csv.join(", "));
            if args.strict && !report.passed() {
                EXIT_CRITERION
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
