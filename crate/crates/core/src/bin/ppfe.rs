use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ppfe::codec::statistical_suite;
use ppfe::harness::{build_worst_case, detect_critical_events, run_monte_carlo, Scenario};
use ppfe::report::{events_csv, mse_csv, BoundVerdict, ConditionsReport, RunSummary};
use ppfe::scenario::{load_scenario, preset};

/// Privacy-preserving fusion estimation: simulation and analysis.
#[derive(Parser)]
#[command(name = "ppfe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run; writes mse.csv, events.csv and summary.json.
    Simulate(SimulateArgs),
    /// Iterate the covariance bound; writes bound.csv and bound.json.
    Bound(BoundArgs),
    /// Capacity, Mahler measure and PBH checks; writes conditions.json.
    Conditions(ConditionsArgs),
    /// Statistical self-test of the quantizer and decoder.
    QuantizerTest(QuantizerArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Named preset, e.g. three-tank-groupA1.
    #[arg(long)]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, env = "PPFE_SEED")]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Convergence tolerance of the bound computed alongside the run.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    source: Source,
    /// Maximum number of bound iterations.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ConditionsArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct QuantizerArgs {
    #[arg(long, env = "PPFE_SEED", default_value_t = ppfe::scenario::DEFAULT_SEED)]
    seed: u64,
    /// Draws per check.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    draws: u64,
}

enum Failure {
    /// Bad flags, scenario or output directory.
    Usage(String),
    /// Anything that goes wrong once the inputs are accepted.
    Runtime(String),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(source: &Source) -> Result<Scenario, Failure> {
    match (&source.preset, &source.scenario) {
        (Some(name), None) => preset(name).map_err(usage),
        (None, Some(path)) => load_scenario(path).map_err(usage),
        _ => Err(usage("exactly one of --preset or --scenario is required")),
    }
}

fn check_tol(tol: Option<f64>) -> Result<Option<f64>, Failure> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(usage(format!("--tol must be positive, got {t}"))),
        t => Ok(t),
    }
}

fn prepare_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| usage(format!("output directory {}: {e}", dir.display())))?;
    let meta = fs::metadata(dir).map_err(|e| usage(format!("output directory {}: {e}", dir.display())))?;
    if meta.permissions().readonly() {
        return Err(usage(format!("output directory {} is not writable", dir.display())));
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> CmdResult {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut sc = load(&args.source)?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(t) = args.trials {
        sc.trials = t as usize;
    }
    if let Some(w) = args.workers {
        sc.workers = w;
    }
    if let Some(tol) = check_tol(args.tol)? {
        sc.bound.options.tol = tol;
    }
    if let Some(h) = args.horizon {
        sc.horizon = h as usize;
        // A worst-case override is rebuilt for the new horizon.
        if let Some(trace) = &sc.outcome_override {
            let event = detect_critical_events(trace).into_iter().find(|e| e.worst_case);
            sc.outcome_override = match event {
                Some(e) if e.k < sc.horizon => Some(build_worst_case(trace.channels(), sc.horizon, e.channel, e.k).map_err(usage)?),
                _ => return Err(usage("--horizon does not fit the scenario's outcome override")),
            };
        }
    }
    sc.validate().map_err(usage)?;
    prepare_out(&args.out)?;

    let result = run_monte_carlo(&sc).map_err(runtime)?;
    let summary = RunSummary::new(&sc, &result);
    write(&args.out, "mse.csv", &mse_csv(&result))?;
    write(&args.out, "events.csv", &events_csv(&result))?;
    write(&args.out, "summary.json", &summary.to_json())?;
    print!("{}", summary.to_text());
    Ok(())
}

fn bound(args: BoundArgs) -> CmdResult {
    let mut sc = load(&args.source)?;
    if let Some(tol) = check_tol(args.tol)? {
        sc.bound.options.tol = tol;
    }
    let max_steps = args.horizon.map_or(sc.bound.max_steps, |h| h as usize);
    prepare_out(&args.out)?;

    let seq = sc.compute_bound(max_steps).map_err(runtime)?;
    let verdict = BoundVerdict::new(&sc, &seq);
    write(&args.out, "bound.csv", &seq.to_csv())?;
    write(&args.out, "bound.json", &verdict.to_json())?;
    println!("scenario    {}", verdict.scenario);
    println!("verdict     {}", verdict.status);
    println!("steps       {}", verdict.steps);
    println!("final trace {:.6e}", verdict.final_trace);
    if verdict.w_clamped > 0 {
        println!("w clamped   {} iterations", verdict.w_clamped);
    }
    Ok(())
}

fn conditions(args: ConditionsArgs) -> CmdResult {
    let sc = load(&args.source)?;
    prepare_out(&args.out)?;
    let rep = ConditionsReport::new(&sc).map_err(runtime)?;
    write(&args.out, "conditions.json", &rep.to_json())?;
    let verdict = |b: bool| if b { "holds" } else { "fails" };
    println!("scenario       {}", rep.scenario);
    println!("mahler measure {:.6}", rep.capacity.mahler);
    println!("entropy        {:.6}", rep.capacity.entropy);
    println!("capacity       {:.6}", rep.capacity.capacity);
    println!("capacity > entropy: {}", verdict(rep.capacity.holds));
    println!("unit-circle eigenvalues: {}", rep.pbh.unit_circle.len());
    println!("PBH rank test: {}", verdict(rep.pbh.holds));
    Ok(())
}

fn quantizer_test(args: QuantizerArgs) -> CmdResult {
    let lines = statistical_suite(args.seed, args.draws as usize).map_err(runtime)?;
    let mut failed = 0;
    for l in &lines {
        println!("[{}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
        failed += usize::from(!l.pass);
    }
    if failed > 0 {
        return Err(runtime(format!("{failed} of {} checks failed", lines.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bound(a) => bound(a),
        Command::Conditions(a) => conditions(a),
        Command::QuantizerTest(a) => quantizer_test(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
