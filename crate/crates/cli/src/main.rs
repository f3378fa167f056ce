//! `mcsentinel`: run built-in chains under the relative fixed-width stopping
//! rule, analyse chain dumps, and compare stopping criteria.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mcsentinel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the stopping rule on a built-in sampler or a chain file.
    Run(RunArgs),
    /// Fixed-n analysis of a chain file (CSV or f64le).
    Analyze(AnalyzeArgs),
    /// Compare stopping criteria over independent replications.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SamplerKind {
    Ar1,
    TwoState,
    GibbsBvn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Estimator {
    Abm,
    Ubm,
}

#[derive(Args, Debug, Clone)]
struct SamplerArgs {
    #[arg(long, value_enum, default_value = "ar1")]
    sampler: SamplerKind,
    /// AR(1) autocorrelation.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    rho: f64,
    /// Two-state flip probability 0 -> 1.
    #[arg(long, default_value_t = 0.1)]
    p01: f64,
    /// Two-state flip probability 1 -> 0.
    #[arg(long, default_value_t = 0.1)]
    p10: f64,
    /// Gibbs bivariate normal correlation.
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    r: f64,
    /// Number of coordinates (the Gibbs sampler is always 2).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct RuleArgs {
    /// Relative precision. 0.02 is recommended for final inference.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// One minus the confidence level.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Minimum simulation effort before the padding drops.
    #[arg(long, default_value_t = 16_384)]
    n_star: u64,
    /// Batches between checks.
    #[arg(long, default_value_t = 20)]
    gap_batches: u32,
    /// Batch size exponent, in (1/3, 1).
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 100_000_000)]
    max_iter: u64,
    /// Treat frozen coordinates as never satisfied.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Stream samples from a chain file instead of a built-in sampler.
    #[arg(long, value_name = "PATH", conflicts_with = "sampler")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "abm")]
    estimator: Estimator,
    /// Keep the chain in memory to report autocorrelation ESS.
    #[arg(long)]
    with_acf: bool,
    /// Write every sample here (.csv for text, anything else for f64le).
    #[arg(long, value_name = "PATH")]
    dump_chain: Option<PathBuf>,
    /// Report destination (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// json: full report; csv: one row per coordinate.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Log each check to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 16_384)]
    n_star: u64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Leading Geweke fraction.
    #[arg(long, default_value_t = 0.1)]
    frac1: f64,
    /// Trailing Geweke fraction.
    #[arg(long, default_value_t = 0.5)]
    frac2: f64,
    /// Geweke significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, default_value_t = 20)]
    reps: u64,
    /// Comma-separated: fwsr:EPS, fwsr-ubm:EPS, gd:ALPHA@N.
    #[arg(long, default_value = "fwsr:0.1,fwsr:0.05,gd:0.05@15000")]
    criteria: String,
    /// Also compute uBM and report aBM/uBM ratios of sigma_hat.
    #[arg(long)]
    with_ubm: bool,
    /// Comparison table destination (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MCSENTINEL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MCSENTINEL_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
