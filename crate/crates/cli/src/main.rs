//! `svasym`: moment Lyapunov exponents, phase transitions, exact moments and
//! limit laws of discretized stochastic volatility dynamics, as a CLI.
//!
//! Every subcommand emits CSV (header row, '.' decimal separator, no locale)
//! to stdout or to `--out`. All floating point cells carry 12 significant
//! digits. Runs are deterministic: the same configuration produces
//! byte-identical output regardless of worker count.

mod commands;
mod config;
mod emit;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "svasym", version, about = "Stochastic volatility scheme asymptotics")]
struct Cli {
    /// JSON run configuration; explicit flags override config values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moment Lyapunov exponent of a scheme at (rho, beta) or market params.
    Lyapunov(LyapunovArgs),
    /// First-order phase transition line beta_cr(rho) and its critical point.
    PhaseCurve(PhaseCurveArgs),
    /// Exact finite-step moments and the lognormal-equivalent volatility.
    ExactMoments(ExactMomentsArgs),
    /// Monte Carlo estimates (moments, LLN slope, CLT variance).
    Simulate(SimulateArgs),
    /// Law-of-large-numbers slopes and CLT variances for all schemes.
    Limits(LimitsArgs),
    /// Volatility-of-volatility level where the moment explodes.
    ExplosionThreshold(ExplosionArgs),
    /// Regenerate a published data series as CSV.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct LyapunovArgs {
    /// Discretization scheme.
    #[arg(long, value_parser = commands::parse_scheme)]
    scheme: Option<svasym_core::SchemeKind>,
    /// Moment order.
    #[arg(long)]
    q: Option<f64>,
    /// Scaled volatility `sigma_0 sqrt(tau)`.
    #[arg(long)]
    rho: Option<f64>,
    /// Scaled volatility-of-volatility `omega^2 n^2 tau / 2`.
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
}

#[derive(Debug, Args)]
struct MarketArgs {
    /// Initial asset level.
    #[arg(long)]
    s0: Option<f64>,
    /// Initial volatility.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Volatility of volatility.
    #[arg(long)]
    omega: Option<f64>,
    /// Time step.
    #[arg(long)]
    tau: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    n: Option<u32>,
    /// Asset/volatility shock correlation.
    #[arg(long)]
    corr: Option<f64>,
}

#[derive(Debug, Args)]
struct PhaseCurveArgs {
    /// Moment order (integer, at least 2).
    #[arg(long)]
    q: Option<u32>,
    /// Smallest rho sampled.
    #[arg(long)]
    rho_min: Option<f64>,
    /// Largest rho sampled (default: just below the critical rho).
    #[arg(long)]
    rho_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Explicit comma-separated rho grid; overrides min/max/points.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
    /// Also emit the mean-field transition line on the same grid.
    #[arg(long)]
    mean_field: bool,
}

#[derive(Debug, Args)]
struct ExactMomentsArgs {
    /// Moment order (integer, at least 2 so sigma_LN is defined).
    #[arg(long)]
    q: Option<u32>,
    #[command(flatten)]
    market: MarketArgs,
    /// Sweep start (omega); requires --omega-max and --points.
    #[arg(long)]
    omega_min: Option<f64>,
    /// Sweep end (omega).
    #[arg(long)]
    omega_max: Option<f64>,
    /// Number of sweep points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Statistic {
    /// `E[(S_n)^q]`.
    Moment,
    /// `(1/n) log |S_n|`.
    Lln,
    /// Variance of the normalized log fluctuation, with jackknife errors.
    CltVariance,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Discretization scheme.
    #[arg(long, value_parser = commands::parse_scheme)]
    scheme: Option<svasym_core::SchemeKind>,
    /// Moment order (used by --statistic moment).
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<u64>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = ambient pool). Does not affect results.
    #[arg(long)]
    workers: Option<usize>,
    /// Pair each path with its antithetic reflection.
    #[arg(long)]
    antithetic: bool,
    /// Statistic to estimate.
    #[arg(long, value_enum)]
    statistic: Option<Statistic>,
    /// Directory receiving per-path CSV dumps (columns step,s,sigma).
    #[arg(long, value_name = "DIR")]
    dump_paths: Option<PathBuf>,
    /// Maximum number of paths dumped.
    #[arg(long)]
    dump_limit: Option<u64>,
}

#[derive(Debug, Args)]
struct LimitsArgs {
    /// Restrict output to one scheme.
    #[arg(long, value_parser = commands::parse_scheme)]
    scheme: Option<svasym_core::SchemeKind>,
    /// Scaled volatility.
    #[arg(long)]
    rho: Option<f64>,
    /// Scaled volatility-of-volatility.
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
}

#[derive(Debug, Args)]
struct ExplosionArgs {
    /// Moment order (integer, at least 2).
    #[arg(long)]
    q: Option<u32>,
    /// Initial volatility.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Time step.
    #[arg(long)]
    tau: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    n: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Table1,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Fig1 => "fig1",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
            Target::Fig5 => "fig5",
            Target::Fig6 => "fig6",
            Target::Table1 => "table1",
        }
    }
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Data series to regenerate.
    #[arg(long, value_enum)]
    target: Option<Target>,
}

/// Error carrying the process exit code contract: configuration and domain
/// problems exit 2, numerical non-convergence exits 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<svasym_core::Error> for CliError {
    fn from(e: svasym_core::Error) -> Self {
        match e {
            svasym_core::Error::NonConvergent(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svasym: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let default_out = match &cli.command {
        Command::Reproduce(args) => {
            let target = args
                .target
                .or_else(|| cfg.target.as_deref().and_then(parse_target))
                .ok_or_else(|| CliError::Config("missing --target".into()))?;
            Some(PathBuf::from(format!("{}.csv", target.name())))
        }
        _ => None,
    };
    let out = cli.out.clone().or_else(|| cfg.out.clone()).or(default_out);
    let lines = match cli.command {
        Command::Lyapunov(args) => commands::lyapunov(&args, &cfg)?,
        Command::PhaseCurve(args) => commands::phase_curve(&args, &cfg)?,
        Command::ExactMoments(args) => commands::exact_moments(&args, &cfg)?,
        Command::Simulate(args) => commands::simulate(&args, &cfg)?,
        Command::Limits(args) => commands::limits(&args, &cfg)?,
        Command::ExplosionThreshold(args) => commands::explosion_threshold(&args, &cfg)?,
        Command::Reproduce(args) => {
            let target = args
                .target
                .or_else(|| cfg.target.as_deref().and_then(parse_target))
                .expect("target checked above");
            reproduce::emit(target)?
        }
    };
    emit::write_lines(&lines, out.as_deref())?;
    Ok(())
}

fn parse_target(s: &str) -> Option<Target> {
    Target::value_variants().iter().copied().find(|t| t.name() == s)
}
