//! `netsel` — joint sensor selection and initial-state estimation for
//! nonlinear dynamical networks, batch interface.

mod commands;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "netsel", version, about = "Sensor selection and initial-state estimation for nonlinear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model and export the trajectory as CSV
    Simulate(SimulateArgs),
    /// Run a selection pipeline and write its report
    Select(SelectArgs),
    /// Estimate the initial state for a fixed sensor set
    Estimate(EstimateArgs),
    /// Random-baseline and exhaustive campaigns with error histograms
    Benchmark(BenchmarkArgs),
    /// Wall-clock benchmark of the pipelines across network sizes
    Timing(TimingArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Model spec file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Step size
    #[arg(long)]
    h: f64,
    /// Number of steps L (the trajectory holds L+1 states)
    #[arg(long)]
    steps: usize,
    /// Discretization: fe or ti (family default when omitted)
    #[arg(long)]
    method: Option<String>,
    /// Initial state as a JSON array file
    #[arg(long)]
    x0: Option<PathBuf>,
    /// Seeded initial-state draw: gaussian | uniform:LO:HI
    #[arg(long)]
    x0_policy: Option<String>,
    /// Master seed (falls back to NETSEL_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory CSV path
    #[arg(long)]
    out: PathBuf,
    /// Also write the all-node output sequence CSV here
    #[arg(long)]
    z_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Run config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Pipeline: mads | milp1 | milp2
    #[arg(long)]
    algo: Option<String>,
    /// Sensor budget M_max
    #[arg(long)]
    mmax: Option<usize>,
    /// Cardinality mode: le | eq (per-algorithm default when omitted)
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth initial state file (simulated scenario)
    #[arg(long)]
    x0: Option<PathBuf>,
    /// Seeded ground-truth draw: gaussian | uniform:LO:HI | pattern:IDX:SIGMA
    #[arg(long)]
    x0_policy: Option<String>,
    /// Recorded all-node output CSV (instrumented scenario)
    #[arg(long)]
    z: Option<PathBuf>,
    /// Known truth for error reporting in the instrumented scenario
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Number of extra initial conditions fitted jointly in the relaxed phase
    #[arg(long)]
    multi_trials: Option<usize>,
    /// Direct-search evaluation budget (mads only; default 200*N)
    #[arg(long)]
    mads_budget: Option<usize>,
    /// Start the final estimation from the relaxed solution
    #[arg(long)]
    warm_start_final: bool,
    /// Report JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Installed sensors as 1-based node indices, e.g. 1,3,5
    #[arg(long)]
    sensors: String,
    /// All-node output CSV; reduced to the installed sensors
    #[arg(long)]
    z: Option<PathBuf>,
    /// Already-reduced output CSV matching the sensor list
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimator init as a JSON array file (seeded policy draw otherwise)
    #[arg(long)]
    init: Option<PathBuf>,
    /// Known truth for error reporting
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sensor budgets, e.g. 10,14,18,22
    #[arg(long)]
    mmax: String,
    /// Pipelines to mark on the histograms (default: all three)
    #[arg(long)]
    algos: Option<String>,
    /// Number of random selections per budget
    #[arg(long, default_value_t = 0)]
    random_trials: usize,
    /// Score every feasible selection per budget
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth initial state file
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Seeded ground-truth draw: gaussian | uniform:LO:HI | pattern:IDX:SIGMA
    #[arg(long)]
    truth_policy: Option<String>,
    /// Output directory for CSVs, reports and plot scripts
    #[arg(long)]
    outdir: PathBuf,
    /// Worker threads for campaign trials (default: all processors)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mads_budget: Option<usize>,
}

#[derive(Args)]
pub struct TimingArgs {
    /// Network sizes, e.g. 10,20
    #[arg(long)]
    sizes: String,
    #[arg(long)]
    algos: Option<String>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    /// Discretization (default ti, matching the stiff benchmark setting)
    #[arg(long)]
    method: Option<String>,
    /// Fraction of nodes carrying sensors
    #[arg(long, default_value_t = 0.4)]
    mmax_fraction: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mads_budget: Option<usize>,
}

/// Master seed: flag, then the NETSEL_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("NETSEL_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn exit_code_for(err: &netsel::Error) -> u8 {
    use netsel::Error;
    match err {
        Error::Phase { source, .. } => exit_code_for(source),
        Error::NonFiniteState { .. }
        | Error::NewtonStall { .. }
        | Error::SingularSystem { .. }
        | Error::NegativeConcentration { .. }
        | Error::NonFiniteCost => 4,
        Error::Io(_) => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Select(args) => commands::select(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Benchmark(args) => commands::benchmark(args),
        Command::Timing(args) => commands::timing(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
