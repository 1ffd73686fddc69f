//! `optd`: fit, smooth, evaluate, sample, simulate, benchmark and plot
//! optional Polya tree density estimates.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opt_density::OptError;
use thiserror::Error;

use crate::config::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] OptError),
}

impl CliError {
    /// 1 for usage errors, 2 for bad data or files, 3 for exhausted resources.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) => match e {
                OptError::Config(_) | OptError::UnknownReference(_) | OptError::UnsupportedDimension(_) => 1,
                OptError::Resource(_) | OptError::NoConvergence { .. } => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "optd", version, about = "Optional Polya tree density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a piecewise-constant density to a CSV of samples and write its tree as JSON.
    Fit { input: PathBuf },
    /// Smooth a fitted tree with the finite element estimator.
    Smooth { tree: PathBuf },
    /// Hellinger distance of a model to a reference density or another model,
    /// or the model density at the points of a CSV file.
    Eval {
        model: PathBuf,
        /// Second model to compare against instead of a reference.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Evaluate the density at these points.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Draw samples from a model.
    Sample { model: PathBuf },
    /// Draw samples from a reference density.
    Simulate,
    /// Timing or accuracy tables over a grid of methods and sample sizes.
    Bench,
    /// Draw a model as SVG.
    Plot { model: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit { .. } => "fit",
            Command::Smooth { .. } => "smooth",
            Command::Eval { .. } => "eval",
            Command::Sample { .. } => "sample",
            Command::Simulate => "simulate",
            Command::Bench => "bench",
            Command::Plot { .. } => "plot",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = cli.settings.resolve()?;
    eprint!("{}", settings.describe(cli.command.name()));
    match cli.command {
        Command::Fit { input } => commands::fit(&settings, &input),
        Command::Smooth { tree } => commands::smooth(&settings, &tree),
        Command::Eval { model, against, points } => {
            commands::eval(&settings, &model, against.as_deref(), points.as_deref())
        }
        Command::Sample { model } => commands::sample(&settings, &model),
        Command::Simulate => commands::simulate(&settings),
        Command::Bench => commands::bench(&settings),
        Command::Plot { model } => commands::plot(&settings, &model),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
