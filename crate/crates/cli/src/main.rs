use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use byzpgd::acceptance::{self, SUITES};
use byzpgd::harness::{self, ExperimentSpec};
use byzpgd::optimizer::{derive_config, derive_exact_config};
use byzpgd::output::{to_json_string, trace_csv, write_atomic};
use byzpgd::problems::ProblemMeta;
use byzpgd::trace::Termination;

#[derive(Parser, Debug)]
#[command(name = "byzpgd", version, about = "Byzantine-robust perturbed gradient descent simulator")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write report.json plus per-seed CSV traces.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, env = "BPGD_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Worker threads for the seed fan-out.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print derived optimizer parameters as JSON.
    DeriveParams(DeriveArgs),
    /// Measure the oracle inexactness on the probe grid, per seed.
    MeasureDelta {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run an acceptance suite and print pass/fail per check.
    Accept {
        #[arg(long)]
        suite: String,
        /// Also write the suite report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the CSV trace of a single seed.
    TraceDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seed list overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    /// Inexactness level Delta.
    #[arg(long, required_unless_present = "eps")]
    delta: Option<f64>,
    /// Gradient threshold for an exact oracle; selects the exact-oracle rule.
    #[arg(long, conflicts_with = "delta")]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long = "smoothness", default_value_t = 1.0)]
    l: f64,
    #[arg(long = "rho", default_value_t = 1.0)]
    rho: f64,
    /// Initial gap F(w0) - F*.
    #[arg(long, default_value_t = 1.0)]
    gap: f64,
    #[arg(long, default_value_t = 0.1)]
    delta_fail: f64,
}

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<byzpgd::Error> for Failure {
    fn from(e: byzpgd::Error) -> Self {
        let code = match e.kind() {
            "validation" | "usage" => 2,
            _ => 1,
        };
        Failure { code, kind: e.kind().to_string(), message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

fn load_spec(exp: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::from_path(&exp.config)?;
    if let Some(seeds) = &exp.seeds {
        spec.seeds = seeds.clone();
        spec.validate()?;
    }
    Ok(spec)
}

fn write(path: &Path, text: &str) -> CliResult {
    write_atomic(path, text.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(exp: &ExperimentArgs, out: &Path, threads: Option<usize>) -> CliResult {
    let spec = load_spec(exp)?;
    let result = harness::run_experiment(&spec, threads)?;
    for (seed, trace) in &result.traces {
        write(&out.join("traces").join(format!("seed_{seed}.csv")), &trace_csv(trace))?;
    }
    write(&out.join("report.json"), &to_json_string(&result.report)?)?;
    let s = &result.report.summary;
    println!(
        "{} seeds: {} converged, {} over budget, {} failed",
        s.seeds_total, s.converged, s.budget_exceeded, s.seeds_failed
    );
    if let Some(seed) = result.report.seeds.iter().find(|r| r.error.is_some()) {
        let e = seed.error.as_ref().expect("checked");
        return Err(Failure { code: 1, kind: e.kind.clone(), message: format!("seed {}: {}", seed.seed, e.message) });
    }
    let over: Vec<u64> = result
        .report
        .seeds
        .iter()
        .filter(|r| r.run.as_ref().is_some_and(|x| x.status == Termination::BudgetExceeded))
        .map(|r| r.seed)
        .collect();
    if !over.is_empty() {
        return Err(Failure {
            code: 1,
            kind: "budget_exceeded".into(),
            message: format!("iteration budget exceeded for seeds {over:?}"),
        });
    }
    Ok(())
}

fn derive_params(a: &DeriveArgs) -> CliResult {
    let meta = ProblemMeta::new(a.dim, a.l, a.rho, a.gap)?;
    let cfg = match (a.delta, a.eps) {
        (_, Some(eps)) => derive_exact_config(&meta, eps, a.delta_fail)?,
        (Some(delta), None) => derive_config(&meta, delta, a.delta_fail)?,
        (None, None) => unreachable!("clap requires one of --delta/--eps"),
    };
    print!("{}", to_json_string(&cfg)?);
    Ok(())
}

fn measure_delta(exp: &ExperimentArgs) -> CliResult {
    let spec = load_spec(exp)?;
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let d = harness::measure_spec_inexactness(&spec, seed)?;
        rows.push(json!({"seed": seed, "delta_hat": d}));
    }
    print!("{}", to_json_string(&json!({"schema_version": byzpgd::output::SCHEMA_VERSION, "probes": spec.probe.count, "results": rows}))?);
    Ok(())
}

fn accept(suite: &str, out: Option<&Path>) -> CliResult {
    if !SUITES.contains(&suite) {
        return Err(byzpgd::Error::usage(format!("unknown suite '{suite}'; expected one of {}", SUITES.join(", "))).into());
    }
    let report = acceptance::run_suite(suite)?;
    for c in &report.checks {
        println!("[{}] {suite}: {}", if c.passed { "PASS" } else { "FAIL" }, c.describe());
    }
    if let Some(dir) = out {
        write(&dir.join(format!("accept_{suite}.json")), &to_json_string(&report)?)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure { code: 1, kind: "acceptance_failed".into(), message: format!("suite {suite} failed") })
    }
}

fn trace_dump(config: &Path, seed: u64) -> CliResult {
    let spec = ExperimentSpec::from_path(config)?;
    let (_, _, trace) = harness::run_seed(&spec, seed)?;
    print!("{}", trace_csv(&trace));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run { exp, out, threads } => run(exp, out, *threads),
        Command::DeriveParams(a) => derive_params(a),
        Command::MeasureDelta { exp } => measure_delta(exp),
        Command::Accept { suite, out } => accept(suite, out.as_deref()),
        Command::TraceDump { config, seed } => trace_dump(config, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": {"kind": f.kind, "message": f.message}}));
            ExitCode::from(f.code)
        }
    }
}
