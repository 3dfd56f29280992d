//! Command-line interface: argument parsing and dispatch.
//!
//! `logistic-rayknight <mass|explore|weights|sde|verify|plot>` with a
//! sectioned `key = value` config file; `--seed`, `--replicates`, `--out`
//! and `--workers` override the corresponding config keys. Exit codes:
//! 0 success (for `verify`: all criteria pass), 1 criterion failure,
//! 2 usage or config error, 3 event budget exceeded.

pub mod config;
pub mod csvio;
pub mod runner;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use runner::{CliError, PlotSpec};

#[derive(Debug, Parser)]
#[command(
    name = "logistic-rayknight",
    version,
    about = "Simulation and verification of the exploration representation of logistic branching populations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact jump paths of the mass process, sampled on the time grid.
    Mass(RunArgs),
    /// Exploration paths: terminal slices, occupation residuals, turning points.
    Explore(RunArgs),
    /// Girsanov log-weights of null paths against the configured target law.
    Weights(RunArgs),
    /// Euler paths of the limiting diffusions and the time-change summary.
    Sde(RunArgs),
    /// Run the full acceptance suite and write report.json.
    Verify(RunArgs),
    /// Render a line or CDF plot from a CSV to a static SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file (sectioned key = value); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicate count override.
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker count override (default: LRK_WORKERS, then all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Input CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output SVG.
    #[arg(long)]
    pub output: PathBuf,
    /// Plot kind: line or cdf.
    #[arg(long, default_value = "line")]
    pub kind: String,
    /// Column for the x axis (line plots).
    #[arg(long, default_value = "t")]
    pub x_col: String,
    /// Column for the y axis / sample values.
    #[arg(long, default_value = "z")]
    pub y_col: String,
    /// Optional column whose distinct values become separate series.
    #[arg(long)]
    pub group_col: Option<String>,
}

impl RunArgs {
    fn load_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).map_err(CliError::Config)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.master_seed = seed;
        }
        if let Some(reps) = self.replicates {
            cfg.run.replicates = reps;
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.clone();
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(CliError::Config("--workers must be at least 1".into()));
            }
            cfg.run.workers = w;
        }
        if cfg.run.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        let grid = &cfg.run.t_grid;
        if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(CliError::Config(
                "t_grid must be nonempty, sorted, nonnegative".into(),
            ));
        }
        Ok(cfg)
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mass(args) => runner::run_mass(&args.load_config()?),
        Command::Explore(args) => runner::run_explore(&args.load_config()?),
        Command::Weights(args) => runner::run_weights(&args.load_config()?),
        Command::Sde(args) => runner::run_sde(&args.load_config()?),
        Command::Verify(args) => runner::run_verify(&args.load_config()?),
        Command::Plot(args) => runner::run_plot(&PlotSpec {
            input: args.input,
            output: args.output,
            kind: args.kind,
            x_col: args.x_col,
            y_col: args.y_col,
            group_col: args.group_col,
        }),
    }
}
