//! `panelhc` command-line front end.

mod fit;
mod mc;
mod table;

use std::fmt::Display;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panelhc::{Error, PanelDataset};

#[derive(Debug, Parser)]
#[command(
    name = "panelhc",
    version,
    about = "Fixed-effects panel regression with leverage-aware cluster-robust standard errors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a one-way fixed-effects model and report coefficients.
    Fit(fit::FitArgs),
    /// Per-observation fitted values, residuals and leverage.
    Diagnostics(fit::DiagnosticsArgs),
    /// Run Monte Carlo size and power experiments.
    Mc(mc::McArgs),
}

/// A user-facing error with its exit status.
#[derive(Debug)]
pub struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    pub fn input(message: impl Display) -> Self {
        Failure {
            message: message.to_string(),
            code: 1,
        }
    }

    /// Input problems exit with 1, estimation problems with 2. Unit and
    /// time indices are translated back to the labels in the data.
    pub fn from_error(err: Error, data: Option<&PanelDataset>) -> Self {
        let code = if err.is_input_error() { 1 } else { 2 };
        let message = match (&err, data) {
            (Error::PerfectLeverage { unit, min_eigenvalue }, Some(d)) => format!(
                "perfect leverage: I - H is numerically singular for unit {} (smallest eigenvalue {min_eigenvalue:.3e})",
                d.units()[*unit].id
            ),
            (Error::DegenerateLeverage { position }, Some(d)) => format!(
                "degenerate leverage: every unit has zero leverage at time {}",
                d.time_labels()[*position]
            ),
            _ => err.to_string(),
        };
        Failure { message, code }
    }
}

/// Write to `path`, or standard output when none is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => fit::run_fit(a),
        Command::Diagnostics(a) => fit::run_diagnostics(a),
        Command::Mc(a) => mc::run_mc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
