//! Command-line driver: load a TOML problem, solve or check it, and write CSV artifacts.
//!
//! Exit codes: 0 success, 1 hard error, 2 partial convergence or failed check.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fuzzyfrac", version, about = "Fuzzy fractional variational problems")]
pub struct Cli {
    /// problem configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// output directory, created if missing
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Newton tolerance; also the pass threshold of `check`
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    /// x-grid nodes
    #[arg(long, global = true)]
    pub nodes: Option<usize>,

    /// number of uniform r-levels on [0, 1]
    #[arg(long, global = true)]
    pub rlevels: Option<usize>,

    /// derivative order, applied to both alpha and beta; 1 selects the classical limit
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every r-level and write solution.csv, residuals.csv and meta.txt
    Solve,
    /// Evaluate the residuals of a trajectory CSV (r,x,lower,upper)
    Check {
        /// trajectory CSV
        trajectory: PathBuf,
    },
    /// Locate the free terminal point on the configured curve and solve on [a, b*]
    Transversality,
    /// Solve for several orders and compare with the registered closed form
    Sweep {
        /// comma-separated orders, e.g. 0.7,0.9,0.99
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        alphas: Vec<f64>,
    },
    /// Check the stacking conditions of a level CSV (r,lower,upper) or a trajectory CSV
    ValidateFuzzy {
        csv: PathBuf,
    },
}

/// Parse arguments, run the command, print diagnostics, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
