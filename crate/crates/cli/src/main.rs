//! `hydrocast`: reproducible river-discharge forecasting runs.
//!
//! Subcommands: `synth`, `ingest`, `train`, `tune`, `evaluate`, `forecast`.
//! Every run is reproducible from its config file and seed; diagnostics go
//! to stderr and machine-readable output to files or stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use hydrocast::synth::BasinParams;

use commands::{EvaluateArgs, ForecastArgs, IngestArgs};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "hydrocast", about = "River-discharge forecasting toolkit")]
struct Cli {
    /// Cap on grid-search worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run-configuration TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Override single keys, e.g. `--set seed=7 --set pipeline.model="gbt"`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic basin as climate + discharge CSVs.
    Synth {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 4000)]
        days: usize,
        #[arg(long, default_value = "2005-01-01")]
        start: NaiveDate,
        /// Base flow, m³/s.
        #[arg(long, default_value_t = 150.0)]
        base_flow: f64,
        /// AR(1) persistence in (0, 1).
        #[arg(long, default_value_t = 0.85)]
        ar_coeff: f64,
        /// Discharge innovation noise, m³/s.
        #[arg(long, default_value_t = 40.0)]
        noise_scale: f64,
    },
    /// Parse, clean, fuse, and align raw CSVs into one series.
    Ingest {
        /// Climate CSV (repeat for several stations).
        #[arg(long, required = true)]
        climate: Vec<PathBuf>,
        #[arg(long)]
        discharge: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Disable same-date averaging across stations.
        #[arg(long)]
        no_average_stations: bool,
        /// Extra climate columns to carry through.
        #[arg(long = "extra-col")]
        extra_columns: Vec<String>,
    },
    /// Train a pipeline from a config file and write a checkpoint.
    Train(ConfigArgs),
    /// Grid-search hyper-parameters and write the results table.
    Tune(ConfigArgs),
    /// Metrics for one or more checkpoints on a series.
    Evaluate {
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Portion of the data to score: all, train, or test.
        #[arg(long, default_value = "all")]
        split: String,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },
    /// Emit a forecast series and chart from a checkpoint.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Forecast a single issue date instead of every feasible date.
        #[arg(long)]
        date: Option<NaiveDate>,
        /// Require (and emit) the 5-step multistep layout.
        #[arg(long)]
        multistep: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok(); // a pool may already exist; the cap is advisory then
    }
    match cli.command {
        Command::Synth {
            out,
            seed,
            days,
            start,
            base_flow,
            ar_coeff,
            noise_scale,
        } => {
            let params = BasinParams {
                seed,
                n_days: days,
                start_date: start,
                base_flow,
                ar_coeff,
                noise_scale,
                ..Default::default()
            };
            commands::cmd_synth(params, &out)
        }
        Command::Ingest {
            climate,
            discharge,
            out,
            no_average_stations,
            extra_columns,
        } => commands::cmd_ingest(&IngestArgs {
            climate,
            discharge,
            out,
            average_stations: !no_average_stations,
            extra_columns,
        }),
        Command::Train(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            commands::cmd_train(&config)
        }
        Command::Tune(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            commands::cmd_tune(&config)
        }
        Command::Evaluate {
            checkpoint,
            data,
            out,
            split,
            train_fraction,
        } => commands::cmd_evaluate(&EvaluateArgs {
            checkpoints: checkpoint,
            data,
            out,
            split,
            train_fraction,
        }),
        Command::Forecast {
            checkpoint,
            data,
            out,
            date,
            multistep,
        } => commands::cmd_forecast(&ForecastArgs {
            checkpoint,
            data,
            out,
            date,
            multistep,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
