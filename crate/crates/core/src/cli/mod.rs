//! Command-line front end.
//!
//! Exit codes: `0` success, `1` I/O or numerical failure, `2` usage or
//! validation error.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::Error;

pub use commands::{AdaptArgs, BenchArgs, BoundsArgs, ClassifyArgs, EstimateArgs, MalteseArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "mrproj", version, about = "Multi-resolution local least-squares regression")]
pub struct Cli {
    /// Config file (JSON object or `key = value` lines); flags win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; falls back to MRPROJ_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-level fit of a CSV dataset.
    Estimate(EstimateArgs),
    /// Lepski-adaptive fit over a range of levels.
    Adapt(AdaptArgs),
    /// Moving-grid fit for designs with unknown support.
    Maltese(MalteseArgs),
    /// Plug-in classification experiment under a margin condition.
    Classify(ClassifyArgs),
    /// Tail-bound curves, optionally against Monte-Carlo frequencies.
    Bounds(BoundsArgs),
    /// Benchmark-signal study with random designs.
    Simulate(SimulateArgs),
    /// Regression counts and timings against the local polynomial baseline.
    Bench(BenchArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Parse(_) | Error::BelowValidityFloor { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::Io(_) => CliError::Io(e.to_string()),
            Error::BasisConstruction(_) | Error::Fit { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("MRPROJ_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("MRPROJ_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let file = cli.config.as_deref().map(config::load_config_file).transpose()?;
    let file = file.as_ref();
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a, file),
        Command::Adapt(a) => commands::adapt(a, file),
        Command::Maltese(a) => commands::maltese(a, file),
        Command::Classify(a) => commands::classify(a, file),
        Command::Bounds(a) => commands::bounds(a, file),
        Command::Simulate(a) => commands::simulate(a, file),
        Command::Bench(a) => commands::bench(a, file),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mrproj: {e}");
            e.exit_code()
        }
    }
}
