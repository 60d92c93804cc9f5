//! `tlstark` command-line tool.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 data
//! error (missing or malformed input files, protocol violations), 5
//! numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tlstark::ErrorClass;

#[derive(Debug, Parser)]
#[command(name = "tlstark", version, about = "Talbot-Lau Stark deflectometry toolkit")]
pub struct Cli {
    /// JSON file overlaid on the built-in configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Relative tolerance: quadrature for shift/sweep/synth/deconv, α for
    /// fit, relaxation residual for field. Must lie in (0, 0.1).
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GridArgs {
    /// Species name from the configuration.
    #[arg(long, default_value = "C60")]
    pub species: String,
    /// Polarizability volume in Å³; defaults to the species' reference value.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Voltages in kV: comma list and/or start:stop:step ranges.
    #[arg(long = "voltage-kv", value_name = "LIST")]
    pub voltage_kv: Option<String>,
    /// Mean velocities in m/s: comma list and/or start:stop:step ranges.
    #[arg(long, value_name = "LIST")]
    pub velocity: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-velocity fringe shift table.
    Shift(GridArgs),
    /// Signal at a fixed mask position against deflection voltage.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Relative 1/e² width; defaults to the configured or interpolated width.
        #[arg(long)]
        width: Option<f64>,
        /// Mask grating position in nm.
        #[arg(long = "position-nm")]
        position_nm: Option<f64>,
    },
    /// Synthetic measurement campaign written as a campaign directory.
    Synth {
        #[command(flatten)]
        grid: GridArgs,
        /// Random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Mean counts per point at unit signal.
        #[arg(long)]
        counts: Option<f64>,
        /// Linear phase drift in rad per hour.
        #[arg(long = "drift-rad-per-hour")]
        drift: Option<f64>,
        /// Write exact expectation values instead of Poisson counts.
        #[arg(long)]
        noiseless: bool,
    },
    /// Polarizability from a campaign directory.
    Fit {
        /// Campaign directory containing manifest.json.
        campaign: PathBuf,
        /// Visibility curve (two-column text); defaults to the campaign's.
        #[arg(long)]
        visibility: Option<PathBuf>,
        /// Skip the reference-scan drift correction.
        #[arg(long = "no-drift-correction")]
        no_drift_correction: bool,
    },
    /// Visibility curve V(v) from velocity-averaged visibilities.
    Deconv {
        /// JSON list of {distribution, visibility, uncertainty}.
        measurements: PathBuf,
        /// Regularization strength; defaults to the discrepancy principle.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Solve the deflector electrostatics.
    Field {
        /// Transverse electrode geometry (JSON); defaults to the surrogate.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Longitudinal electrode geometry (JSON); defaults to the surrogate.
        #[arg(long)]
        longitudinal: Option<PathBuf>,
        /// Grid spacing in m for the transverse solve.
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Systematic uncertainty table.
    Budget {
        /// Largest fringe shift in nm for the resolution term.
        #[arg(long = "max-shift-nm")]
        max_shift_nm: Option<f64>,
        /// Override or add a term, e.g. `--term voltage=0.01`.
        #[arg(long, value_name = "NAME=VALUE")]
        term: Vec<String>,
    },
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 3,
        ErrorClass::Data => 4,
        ErrorClass::Numeric => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
