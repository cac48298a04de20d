//! Experiment runner for the hyperbolic NLS lab.
//!
//! `hnls run <config>` executes one JSON configuration into a run directory
//! holding CSV/JSON/binary outputs, a `summary.json` with fit verdicts and
//! check results, and a `manifest.json` inventory with SHA-256 hashes.
//! `hnls report <dir>` verifies those hashes and prints a summary table.
//!
//! Exit codes: 0 success, 1 failed check or integrity error, 2 schema
//! error, 3 resource cap.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::error::{CliError, Result, EXIT_FAILURE};

/// Environment variable naming the root for run directories.
pub const OUTPUT_ROOT_VAR: &str = "HNLS_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "hnls", about = "Hyperbolic NLS numerical lab", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration file (or replay a manifest).
    Run {
        config: PathBuf,
        /// Run directory; defaults to `$HNLS_OUTPUT_ROOT/<kind>-<hash>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured execution mode.
        #[arg(long, value_enum)]
        execution: Option<ExecArg>,
    },
    /// Verify and summarize a run directory or a directory of runs.
    Report {
        dir: PathBuf,
        /// Where to write the machine-readable report; `<dir>/report.json`
        /// by default.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the artifact version.
    Version,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Config::from_json(&text)
}

/// Output root from the environment, `runs` when unset.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Version => {
            println!("hnls {} (output schema {})", env!("CARGO_PKG_VERSION"), config::SCHEMA_VERSION);
            Ok(0)
        }
        Command::Run { config, out, execution } => {
            let mut cfg = load_config(&config)?;
            if let Some(e) = execution {
                cfg.execution = match e {
                    ExecArg::Sequential => hnls_core::Execution::Sequential,
                    ExecArg::Parallel => hnls_core::Execution::Parallel,
                };
            }
            let dir = out.unwrap_or_else(|| run::default_dir(&cfg, &output_root()));
            let outcome = run::run_config(&cfg, &dir)?;
            println!("{}", outcome.dir.display());
            for c in outcome.summary.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {} (experiment {}) = {:?}", c.metric, c.experiment, c.value);
            }
            Ok(if outcome.summary.passed { 0 } else { EXIT_FAILURE })
        }
        Command::Report { dir, json } => {
            let report = report::build_report(&dir)?;
            print!("{}", report::render(&report));
            let path = json.unwrap_or_else(|| dir.join("report.json"));
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            Ok(if report.passed { 0 } else { EXIT_FAILURE })
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
