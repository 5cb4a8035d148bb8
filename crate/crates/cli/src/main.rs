use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttfeedback_cli::config::LawSpec;
use ttfeedback_cli::{init_threads, run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "ttfeedback", version, about = "Tensor-train value functions for nonlinear feedback control")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build a value function and write value.ftt and report.json.
    Approximate(Flags),
    /// Run the closed loop and write trajectory.csv and metrics.json.
    Simulate(Flags),
    /// Run a benchmark suite and write its CSV table and verdict.
    Benchmark(Flags),
    /// Check oracle gradients against finite differences.
    SampleTest(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of Cucker-Smale agents.
    #[arg(long)]
    na: Option<usize>,
    /// Dimension of the analytic test functions.
    #[arg(long)]
    d: Option<usize>,
    /// Lorenz control weight.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    u_max: Option<f64>,
    /// FTT file read by `simulate`.
    #[arg(long)]
    ftt: Option<PathBuf>,
    /// Feedback law of `simulate`.
    #[arg(long, value_parser = parse_law)]
    law: Option<LawSpec>,
    /// Benchmark suite.
    #[arg(long)]
    suite: Option<String>,
    /// Initial state as comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, short)]
    verbose: bool,
}

fn parse_law(s: &str) -> Result<LawSpec, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown law {s:?}; expected tt, lqr, sdre or two-boxes"))
}

fn resolve(command: Command, flags: Flags) -> Result<RunConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(Overrides {
        problem: flags.problem,
        lambda: flags.lambda,
        tol: flags.tol,
        seed: flags.seed,
        out: flags.out,
        na: flags.na,
        d: flags.d,
        gamma: flags.gamma,
        u_max: flags.u_max,
        ftt: flags.ftt,
        law: flags.law,
        suite: flags.suite,
        x0: flags.x0,
        verbose: flags.verbose,
    });
    config.resolve(command)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Approximate(f) => (Command::Approximate, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Benchmark(f) => (Command::Benchmark, f),
        Sub::SampleTest(f) => (Command::SampleTest, f),
    };
    let result = init_threads().and_then(|_| resolve(command, flags)).and_then(run);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ttfeedback: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
