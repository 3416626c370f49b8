//! Command-line front end for the mesh planner: instance generation, single
//! plans, parameter sweeps, paired model comparisons and exact-front checks.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 no feasible plan could
//! be built, 3 instance too large for exhaustive enumeration, 4 the search
//! missed the exact front in `verify`.

pub mod commands;
pub mod options;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::options::Options;

#[derive(Parser, Debug)]
#[command(
    name = "meshplan",
    version,
    about = "Multi-objective wireless mesh backbone planner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an instance and write it as JSON.
    Instance {
        #[command(flatten)]
        options: Options,
    },
    /// Run one optimization and write the archive, statistics and cheapest plan.
    Plan {
        #[command(flatten)]
        options: Options,
        /// Also write the AP-to-gateway routes of the cheapest plan.
        #[arg(long)]
        dump_routes: bool,
    },
    /// Repeat the optimization over a list of grid sizes, traffic levels or radio counts.
    Sweep {
        #[command(flatten)]
        options: Options,
        /// Swept parameter: grid, traffic or radios.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
    },
    /// Run several models on the same instances and seeds.
    Compare {
        #[command(flatten)]
        options: Options,
        /// Comma-separated models, at least two.
        #[arg(long, default_value = "cov,llb,glb,lglb")]
        models: String,
    },
    /// Check the optimizer against the exact front of a tiny instance.
    Verify {
        #[command(flatten)]
        options: Options,
        /// Minimum share of the exact front the archive must reach.
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        /// Committed front file the freshly enumerated front must match.
        #[arg(long, value_name = "FILE")]
        fixture: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(meshplan::Error),
    VerificationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use meshplan::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::VerificationFailed(_) => 4,
            CliError::Core(e) => match e {
                E::GuardRefused(_) => 3,
                E::Channelization { .. }
                | E::RoutingInfeasible { .. }
                | E::Construction(_)
                | E::ConstructionExhausted { .. }
                | E::EmptyArchive => 2,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::VerificationFailed(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<meshplan::Error> for CliError {
    fn from(e: meshplan::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv output: {e}"))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
