//! Command-line front end: solve a model spec for its optimal phase-wise
//! dividend barriers, certify the solution, estimate values by simulation,
//! or re-run one of the embedded benchmark cases.
//!
//! Phase indices are 1-based everywhere on this surface (arguments, tables,
//! reports); the library uses 0-based indices internally.
//!
//! Exit codes: 0 success (and all checks passed), 1 verification or
//! reproduction mismatch, 2 spec/argument error, 3 solver failure.

mod spec;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use divbarrier::golden;
use divbarrier::simulator::{estimate_value, SimConfig};
use divbarrier::solver::{solve, RiskModel, SolveError, SolveResult, SolveSummary, SolverConfig};
use divbarrier::verifier::{verify_all, CheckStatus, Tolerances, VerificationReport};
use serde::Serialize;
use spec::ModelSpec;

const EXIT_CHECK_FAILED: i32 = 1;
const EXIT_SPEC_ERROR: i32 = 2;
const EXIT_SOLVER_ERROR: i32 = 3;

/// Worker threads for simulation; default 1.
const THREADS_ENV: &str = "DIVBARRIER_THREADS";

#[derive(Parser)]
#[command(
    name = "divbarrier",
    version,
    about = "Optimal phase-wise dividend barriers for phase-type modulated risk processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal barriers and value functions for a model spec
    Solve(SolveArgs),
    /// Solve, then certify the solution against the optimality checks
    Verify(VerifyArgs),
    /// Monte Carlo estimate of expected discounted dividends
    Simulate(SimulateArgs),
    /// Re-run an embedded benchmark case and compare barriers
    Reproduce(ReproduceArgs),
}

#[derive(Args, Clone, Copy)]
struct SolverOverrides {
    /// Grid spacing override (money units)
    #[arg(long = "h", value_name = "H")]
    h: Option<f64>,
    /// Grid upper end override
    #[arg(long = "xmax", value_name = "X")]
    xmax: Option<f64>,
    /// Sup-norm stopping tolerance override
    #[arg(long = "tol", value_name = "TOL")]
    tol: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Model spec file (JSON)
    spec: PathBuf,
    #[command(flatten)]
    overrides: SolverOverrides,
    /// Write x, V_1..V_n, V_{n+1} at grid resolution to this CSV file
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model spec file (JSON)
    spec: PathBuf,
    #[command(flatten)]
    overrides: SolverOverrides,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Test hook: corrupt the solution before verification
    #[arg(long, value_enum)]
    fault: Option<Fault>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model spec file (JSON)
    spec: PathBuf,
    /// Initial wealth
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    /// Starting phase (1-based)
    #[arg(long, default_value_t = 1)]
    phase: usize,
    /// Number of simulated paths
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// RNG seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Truncation horizon (time units)
    #[arg(long, default_value_t = 200.0)]
    horizon: f64,
    /// Comma-separated barriers; omitted means "solve the spec first"
    #[arg(long, value_name = "B1,B2,...")]
    barriers: Option<String>,
    /// Mirror claim draws within path pairs
    #[arg(long)]
    antithetic: bool,
    /// Also solve the spec and print the solver value and z-score
    #[arg(long)]
    compare_solver: bool,
    #[command(flatten)]
    overrides: SolverOverrides,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Benchmark case id (1..=7)
    case: u8,
    #[command(flatten)]
    overrides: SolverOverrides,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    /// Add 0.1 to one grid value of V_1 below its barrier
    Perturb,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn spec(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SPEC_ERROR,
            message: message.into(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Self {
            code: EXIT_SOLVER_ERROR,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}

fn load_and_solve(
    path: &Path,
    overrides: &SolverOverrides,
) -> Result<(RiskModel, SolverConfig, SolveResult), Failure> {
    let spec = ModelSpec::load(path).map_err(Failure::spec)?;
    let model = spec
        .build_model()
        .map_err(|e| Failure::spec(format!("{}: {e}", path.display())))?;
    let cfg = spec
        .build_config(overrides.h, overrides.xmax, overrides.tol)
        .map_err(|e| Failure::spec(format!("{}: {e}", path.display())))?;
    let result = solve(&model, &cfg)?;
    Ok((model, cfg, result))
}

fn cmd_solve(args: SolveArgs) -> Result<i32, Failure> {
    let (model, _, result) = load_and_solve(&args.spec, &args.overrides)?;
    print_solution(&model, &result);
    if let Some(path) = &args.csv {
        write_csv(path, &result)
            .map_err(|e| Failure::spec(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn print_solution(model: &RiskModel, result: &SolveResult) {
    println!("phase   barrier        V(0)");
    for i in 0..model.env().n() {
        println!(
            "{:>5}   {:<12.6}   {:.6}",
            i + 1,
            result.barriers[i],
            result.values[i].values()[0]
        );
    }
    println!(
        "converged in {} iterations; final sup-norm diff {:.3e}",
        result.iterations, result.final_sup_diff
    );
}

/// Full-precision CSV: the default float formatting round-trips exactly.
fn write_csv(path: &Path, result: &SolveResult) -> std::io::Result<()> {
    let grid = result.grid();
    let n = result.values.len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=n + 1).map(|j| format!("V_{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for k in 0..grid.len() {
        write!(out, "{}", grid.point(k))?;
        for f in &result.values {
            write!(out, ",{}", f.values()[k])?;
        }
        writeln!(out, ",{}", result.claim_value.values()[k])?;
    }
    out.flush()
}

#[derive(Serialize)]
struct StructuredReport<'a> {
    schema_version: u32,
    passed: bool,
    solve: SolveSummary,
    checks: &'a [divbarrier::verifier::CheckRecord],
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, Failure> {
    let (model, _, mut result) = load_and_solve(&args.spec, &args.overrides)?;
    if let Some(Fault::Perturb) = args.fault {
        result.inject_value_fault(0, 0.1);
    }
    let report = verify_all(&model, &result, &Tolerances::default());
    match args.format {
        Format::Text => print_report(&model, &result, &report),
        Format::Structured => {
            let doc = StructuredReport {
                schema_version: 1,
                passed: report.passed(),
                solve: SolveSummary::from(&result),
                checks: &report.checks,
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("serializable")
            );
        }
    }
    Ok(if report.passed() {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

fn print_report(model: &RiskModel, result: &SolveResult, report: &VerificationReport) {
    print_solution(model, result);
    println!();
    println!(
        "{:<34} {:<8} {:>13} {:>13}  location",
        "check", "status", "measured", "tolerance"
    );
    for check in &report.checks {
        let (status, reason) = match &check.status {
            CheckStatus::Pass => ("PASS", None),
            CheckStatus::Fail => ("FAIL", None),
            CheckStatus::Skipped { reason } => ("SKIP", Some(reason.clone())),
        };
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"));
        let location = match (check.phase, check.x) {
            (Some(p), Some(x)) => format!("phase {p}, x = {x:.4}"),
            _ => String::new(),
        };
        println!(
            "{:<34} {:<8} {:>13} {:>13}  {}",
            check.name,
            status,
            fmt_opt(check.measured),
            fmt_opt(check.tolerance),
            location
        );
        if let Some(reason) = reason {
            println!("{:<34} {:<8} {}", "", "", reason);
        }
        if let Some(note) = &check.note {
            println!("{:<34} {:<8} {}", "", "", note);
        }
    }
    println!();
    println!("overall: {}", if report.passed() { "PASS" } else { "FAIL" });
}

fn sim_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1)
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, Failure> {
    let spec = ModelSpec::load(&args.spec).map_err(Failure::spec)?;
    let model = spec
        .build_model()
        .map_err(|e| Failure::spec(format!("{}: {e}", args.spec.display())))?;
    let n = model.env().n();
    if args.phase == 0 || args.phase > n {
        return Err(Failure::spec(format!(
            "phase must be in 1..={n}, got {}",
            args.phase
        )));
    }
    if args.x0 < 0.0 {
        return Err(Failure::spec(format!(
            "x0 must be nonnegative, got {}",
            args.x0
        )));
    }
    if args.horizon.is_nan() || args.horizon <= 0.0 {
        return Err(Failure::spec(format!(
            "horizon must be positive, got {}",
            args.horizon
        )));
    }
    if args.paths == 0 {
        return Err(Failure::spec("paths must be at least 1"));
    }

    let explicit_barriers = args
        .barriers
        .as_deref()
        .map(|text| parse_barriers(text, n))
        .transpose()?;

    let solved = if explicit_barriers.is_none() || args.compare_solver {
        let cfg = spec
            .build_config(args.overrides.h, args.overrides.xmax, args.overrides.tol)
            .map_err(|e| Failure::spec(format!("{}: {e}", args.spec.display())))?;
        Some(solve(&model, &cfg)?)
    } else {
        None
    };
    let barriers = explicit_barriers.unwrap_or_else(|| {
        solved
            .as_ref()
            .expect("solved when not explicit")
            .barriers
            .clone()
    });

    let cfg = SimConfig::new(args.paths, args.horizon, args.seed)
        .with_antithetic(args.antithetic)
        .with_threads(sim_threads());
    let phase0 = args.phase - 1;
    let est = estimate_value(&model, &barriers, args.x0, phase0, &cfg);

    println!(
        "barriers: [{}]",
        barriers
            .iter()
            .map(|b| format!("{b:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "mean {:.6}  stderr {:.6}  paths {}  truncation bound {:.3e}  seed {}",
        est.mean, est.stderr, est.paths, est.truncation_bound, est.seed
    );
    if args.compare_solver {
        let result = solved.as_ref().expect("solved for comparison");
        let reference = result.values[phase0]
            .eval(args.x0)
            .map_err(SolveError::from)?;
        let z = if est.stderr > 0.0 {
            (est.mean - reference) / est.stderr
        } else {
            f64::INFINITY * (est.mean - reference).signum()
        };
        println!("solver value {reference:.6}  z = {z:+.3}");
    }
    Ok(0)
}

fn parse_barriers(text: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let barriers: Vec<f64> = text
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::spec(format!("cannot parse --barriers: {e}")))?;
    if barriers.len() != n {
        return Err(Failure::spec(format!(
            "--barriers needs {n} values, got {}",
            barriers.len()
        )));
    }
    if barriers.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Failure::spec("--barriers entries must be nonnegative"));
    }
    Ok(barriers)
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<i32, Failure> {
    let case = golden::case(args.case)
        .ok_or_else(|| Failure::spec(format!("no embedded case {}; ids are 1..=7", args.case)))?;
    let model = case.model();
    let defaults = SolverConfig::default();
    let grid = divbarrier::valuefn::Grid::from_spacing(
        args.overrides.xmax.unwrap_or(defaults.grid.x_max()),
        args.overrides.h.unwrap_or(defaults.grid.spacing()),
    )
    .map_err(|e| Failure::spec(e.to_string()))?;
    let cfg = SolverConfig {
        grid,
        tol: args.overrides.tol.unwrap_or(defaults.tol),
        ..defaults
    };
    let result = solve(&model, &cfg)?;

    println!("case {} ({})", case.id, case.label);
    println!(
        "phase   computed     reference   |diff|     within ±{:.2}",
        case.barrier_tolerance
    );
    let mut pass = true;
    for i in 0..case.n() {
        let diff = (result.barriers[i] - case.expected_barriers[i]).abs();
        let ok = diff <= case.barrier_tolerance;
        pass &= ok;
        println!(
            "{:>5}   {:<10.4}   {:<9.4}   {:<8.4}   {}",
            i + 1,
            result.barriers[i],
            case.expected_barriers[i],
            diff,
            if ok { "yes" } else { "NO" }
        );
    }
    println!("RESULT: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
}
