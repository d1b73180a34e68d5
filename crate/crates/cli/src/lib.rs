//! Config-driven runner for the Bergman geodesic studies.
//!
//! Every subcommand reads a TOML configuration (defaults in
//! `config/default.toml`), writes CSV tables plus `summary.json` into the
//! output directory, and maps outcomes onto exit codes:
//! 0 success, 1 configuration error, 2 numerical failure, 3 failed checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Instant, SystemTime};

use bergeo::Exec;
use clap::{Parser, Subcommand};

use crate::config::{parse_k_list, Config, Overrides};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "BERGEO_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bergeo::Error> for CliError {
    fn from(e: bergeo::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bergeo", version, about = "Bergman geodesic experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration merged over the shipped defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated levels, e.g. 8,16,32.
    #[arg(long, global = true)]
    pub k_list: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    pub tol_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Per-level spectrum table.
    Spectrum,
    /// Sampled Bergman and exact geodesic surfaces.
    Geodesic,
    /// Monge-Ampère masses and their decay.
    Mass,
    /// Sup-norm convergence to the exact geodesic.
    Converge,
    /// Variance, spacing, Harnack and Sobolev checks.
    Stats,
    /// The acceptance suite.
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Geodesic => "geodesic",
            Command::Mass => "mass",
            Command::Converge => "converge",
            Command::Stats => "stats",
            Command::Suite => "suite",
        }
    }
}

/// Execution strategy and thread count from `BERGEO_THREADS`.
pub fn exec_from_env() -> Result<(Exec, usize), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    if threads == 1 || !cfg!(feature = "parallel") {
        return Ok((Exec::Sequential, 1));
    }
    #[cfg(feature = "parallel")]
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        Ok((Exec::Parallel, rayon::current_num_threads()))
    }
    #[cfg(not(feature = "parallel"))]
    unreachable!()
}

/// Resolves the configuration for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    cfg.apply(&Overrides {
        out: cli.out.clone(),
        k_list: cli
            .k_list
            .as_deref()
            .map(parse_k_list)
            .transpose()
            .map_err(|e| CliError::Config(format!("--k-list: {e}")))?,
        seed: cli.seed,
        tol_scale: cli.tol_scale,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}: value {:e}, tolerance {:e} {}", c.name, c.value, c.tolerance, c.detail);
            }
            if report.passed() {
                0
            } else {
                3
            }
        }
        Err(e) => {
            eprintln!("bergeo: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<report::RunReport, CliError> {
    let cfg = resolve_config(cli)?;
    let (exec, threads) = exec_from_env()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let report = commands::dispatch(cli.command, &cfg, exec)?;
    report.write(&cfg.out, &cfg.hash(), started, clock.elapsed(), threads)?;
    Ok(report)
}
