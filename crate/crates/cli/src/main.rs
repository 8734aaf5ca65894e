//! `pograd` command-line driver.

mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::CliError;
use pograd::draws::Method;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pograd", version, about = "Bayesian inference of latent partial orders from rankings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// hard_mcmc, relaxed_hmc, fullrank_vi, majority or softdag.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Decoding threshold on closure probabilities.
    #[arg(long)]
    zeta: Option<f64>,
    /// Soft-min temperature of the relaxed model.
    #[arg(long)]
    tau: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a dataset with a known ground-truth order.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a method to the training traces of a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Decode a fit into a closure and its Hasse diagram.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Directory written by `fit`.
        #[arg(long)]
        fit: PathBuf,
    },
    /// Score a fit against a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// Fit whose closure probabilities serve as the reference for MAE.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Compare the closure probabilities of two fits.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: pograd::Error| e.to_string())
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let ov = Overrides { seed: c.seed, method: c.method, zeta: c.zeta, tau: c.tau };
    RunConfig::load(c.config.as_deref(), &ov)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { common } => {
            let path = commands::cmd_generate(&load(&common)?, &common.out)?;
            println!("{}", path.display());
        }
        Command::Fit { common, data } => commands::cmd_fit(&load(&common)?, &data, &common.out)?,
        Command::Decode { common, fit } => {
            commands::cmd_decode(&load(&common)?, &fit, &common.out)?;
        }
        Command::Eval { common, data, fit, reference } => {
            let r = commands::cmd_eval(&load(&common)?, &data, &fit, reference.as_deref(), &common.out)?;
            println!("{}", pograd::metrics::MetricsReport::csv_header());
            println!("{}", r.csv_row());
        }
        Command::Compare { a, b, out } => {
            let c = commands::cmd_compare(&a, &b, out.as_deref())?;
            println!("n_items,mae,correlation");
            println!("{},{},{}", c.n_items, c.mae, c.correlation.map_or(String::new(), |v| v.to_string()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pograd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
