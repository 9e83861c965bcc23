//! Command-line front end for `isac-core`: configuration, experiment
//! orchestration and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isac_core::SynthesisParams;

pub use error::CliError;

use config::{BetaSweepConfig, ClosedFormsConfig, CriterionSet, Overrides, PowerSweepConfig};

#[derive(Debug, Parser)]
#[command(
    name = "isac",
    version,
    about = "Task-oriented ISAC transceiver experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic feature-model file.
    GenModel(GenModelArgs),
    /// Accuracy and discriminant gain versus communication power.
    SweepPower(SweepArgs),
    /// Accuracy and discriminant gain versus the power split ratio beta.
    SweepBeta(SweepArgs),
    /// Closed-form expressions next to their Monte Carlo counterparts.
    ClosedForms(ClosedFormsArgs),
}

#[derive(Debug, Args)]
pub struct GenModelArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 8)]
    pub dims: usize,
    #[arg(long, default_value_t = SynthesisParams::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub var_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub var_max: f64,
    /// Spread of log(gap / variance) across dimensions.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    /// Discriminant gain between adjacent classes.
    #[arg(long, default_value_t = 8.0)]
    pub dg: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Mse,
    Dg,
    Both,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Flat TOML configuration; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Worker threads (0: one per core). Does not affect results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ClosedFormsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo draws per row.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

impl SweepArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            criterion: self.criterion.map(|c| match c {
                CriterionArg::Mse => CriterionSet::Mse,
                CriterionArg::Dg => CriterionSet::Dg,
                CriterionArg::Both => CriterionSet::Both,
            }),
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn on_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(isac_core::sim::with_workers(workers, f)?)
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenModel(a) => {
            let params = SynthesisParams {
                num_classes: a.classes,
                num_dims: a.dims,
                seed: a.seed,
                variance_min: a.var_min,
                variance_max: a.var_max,
                ratio_jitter: a.jitter,
                pair_dg: a.dg,
            };
            emit(a.out.as_ref(), &commands::gen_model(&params)?)
        }
        Command::SweepPower(a) => {
            let cfg = PowerSweepConfig::load(a.config.as_deref(), &a.overrides())?;
            let csv = on_workers(a.workers, || commands::sweep_power(&cfg))??;
            emit(a.out.as_ref(), &csv.render())
        }
        Command::SweepBeta(a) => {
            let cfg = BetaSweepConfig::load(a.config.as_deref(), &a.overrides())?;
            let csv = on_workers(a.workers, || commands::sweep_beta(&cfg))??;
            emit(a.out.as_ref(), &csv.render())
        }
        Command::ClosedForms(a) => {
            let cfg = ClosedFormsConfig::load(a.config.as_deref(), a.seed, a.trials)?;
            let csv = on_workers(a.workers, || commands::closed_forms(&cfg))??;
            emit(a.out.as_ref(), &csv.render())
        }
    }
}
