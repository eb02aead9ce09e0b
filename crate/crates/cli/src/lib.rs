//! Command-line front end: `simulate`, `scan`, `validate` and `compare`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 truncated run,
//! 3 validation failure.

pub mod commands;
pub mod config;
pub mod csv;
pub mod format;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{run_compare, run_scan, run_simulate, run_validate, CliError};
use crate::config::{parse_assignment, parse_entries, ConfigError, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "cbfkit", version, about = "Control barrier function experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the filtered closed loop and write a trajectory CSV.
    Simulate(CommonArgs),
    /// Evaluate the barrier on a phase-space grid and write a scan CSV.
    Scan(CommonArgs),
    /// Check assumptions and validity; exit 3 if anything fails.
    Validate(CommonArgs),
    /// Simulate several constructions from one initial state and tabulate metrics.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `pendulum` or `bicycle`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Construction(s): hocbf, recbf, backstepping, abc; comma separated for compare.
    #[arg(long)]
    pub cbf: Option<String>,
    /// Parameter override `key=value`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart next to the output file.
    #[arg(long)]
    pub svg: bool,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    /// Resolves file, flags and overrides into one configuration.
    pub fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut entries = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
            entries.extend(parse_entries(&text)?);
        }
        if let Some(s) = &self.scenario {
            entries.push(("scenario".to_string(), s.clone()));
        }
        if let Some(c) = &self.cbf {
            entries.push(("cbf".to_string(), c.clone()));
        }
        if let Some(out) = &self.out {
            entries.push(("output.path".to_string(), out.display().to_string()));
        }
        if self.svg {
            entries.push(("output.svg".to_string(), "true".to_string()));
        }
        for arg in &self.set {
            entries.push(parse_assignment(arg)?);
        }
        ScenarioConfig::from_entries(&entries)
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (common, f): (&CommonArgs, fn(&ScenarioConfig, &mut dyn Write) -> Result<_, CliError>) = match &cli.command {
        Command::Simulate(a) => (a, run_simulate),
        Command::Scan(a) => (a, run_scan),
        Command::Validate(a) => (a, run_validate),
        Command::Compare(a) => (a, run_compare),
    };
    let result = common.resolve().map_err(CliError::from).and_then(|cfg| f(&cfg, stdout));
    match result {
        Ok(status) => status.code(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
