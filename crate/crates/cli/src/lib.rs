//! Command-line front end: configuration, command dispatch, surface cache
//! and CSV output.

// `!(x > 0.0)` is meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::SurfaceCache;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_text, DirLock};

#[derive(Debug, Parser)]
#[command(
    name = "mvhawkes",
    version,
    about = "Mean-variance portfolios under Hawkes jump contagion"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; unspecified keys take the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set hawkes.beta=[[0.5]]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Master seed for the solver, wealth simulation and path export.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $MVHAWKES_OUT or ./mvhawkes-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recompute solved surfaces even when cached.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate Hawkes intensity paths and compare their mean with the moment equation.
    SimulateHawkes,
    /// Solve the value-function surface g~(t, lambda) and export it as CSV.
    SolveG,
    /// Efficient frontier at the configured initial intensity.
    Frontier {
        /// Use the constant-intensity closed form instead, e.g. `--poisson lambda=0.48`.
        #[arg(long, value_name = "lambda=VALUE")]
        poisson: Option<String>,
        /// Check the frontier by forward wealth simulation; exits with 3 on failure.
        #[arg(long)]
        validate: bool,
    },
    /// Parameter sweeps and Hawkes-versus-Poisson comparisons with an ordering report.
    Sensitivity,
    /// Hawkes-versus-Poisson comparisons only.
    ComparePoisson,
}

fn parse_poisson(arg: &str) -> Result<f64, CliError> {
    let raw = arg.strip_prefix("lambda=").unwrap_or(arg);
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--poisson expects lambda=<number>, got `{arg}`")))
}

/// Resolves the configuration from the global flags.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(g.config.as_deref(), &g.overrides)?;
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &g.out {
        cfg.output.dir = Some(out.clone());
    }
    Ok(cfg)
}

/// Runs one command and returns the text to print.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve_config(&cli.global)?;
    let poisson = match &cli.command {
        Command::Frontier { poisson: Some(p), .. } => Some(parse_poisson(p)?),
        _ => None,
    };
    let out = cfg.out_dir();
    let _lock = DirLock::acquire(&out)?;
    write_text(&out.join("config.resolved.toml"), &cfg.to_toml()?)?;
    let mut cache = SurfaceCache::new(cfg.cache_dir(), cli.global.force);

    match &cli.command {
        Command::SimulateHawkes => Ok(commands::simulate_hawkes(&cfg, &out)?.to_string()),
        Command::SolveG => Ok(commands::solve(&cfg, &out, &mut cache)?.to_string()),
        Command::Frontier { validate, .. } => {
            let report = commands::frontier(&cfg, &out, &mut cache, poisson, *validate)?;
            match &report.validation {
                Some(v) if !v.passed() => Err(CliError::CheckFailed(report.to_string())),
                _ => Ok(report.to_string()),
            }
        }
        Command::Sensitivity => {
            let report = commands::sensitivity(&cfg, &out, &mut cache)?;
            if report.holds() {
                Ok(report.to_string())
            } else {
                Err(CliError::CheckFailed(report.to_string()))
            }
        }
        Command::ComparePoisson => {
            let report = commands::compare_poisson(&cfg, &out, &mut cache)?;
            if report.holds() {
                Ok(report.to_string())
            } else {
                Err(CliError::CheckFailed(report.to_string()))
            }
        }
    }
}
