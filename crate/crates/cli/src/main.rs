//! `nbeddyn` command-line interface: simulate benchmark systems, train the
//! augmented latent ODE, forecast from new observation windows, and compare
//! against delay-embedding baselines.

mod benchmark;
mod commands;
mod config;
mod data;
mod rundir;
mod svg;

use clap::{Parser, Subcommand};
use commands::{Console, ForecastArgs, LyapunovArgs};
use config::ExperimentConfig;
use rundir::RunDirs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nbeddyn", version, about = "Latent ODE identification of partially observed dynamics")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for run outputs.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Suppress progress output (errors still print).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system and write truth/observed CSVs.
    Simulate,
    /// Jointly fit the ODE parameters and latent states on the training
    /// segment.
    Train,
    /// Infer an initial condition from an observation window and integrate
    /// forward.
    Forecast {
        /// Trained model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Observation-window CSV (optionally with a mask column).
        #[arg(long)]
        obs: PathBuf,
        /// Forecast length in sampling steps.
        #[arg(long)]
        horizon: usize,
        /// Reference CSV for error reporting and the overlay figure.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train and score the model and all configured baselines on one split.
    Benchmark,
    /// Estimate the largest Lyapunov exponent of a series.
    Lyapunov {
        /// Series CSV; defaults to the configured dataset's ground truth.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Delay used to embed a scalar series (default: mutual-information
        /// estimate).
        #[arg(long)]
        tau: Option<usize>,
        /// Embedding dimension for a scalar series (default: false-nearest-
        /// neighbor estimate).
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Jacobian eigenvalue moduli of a trained model over its training
    /// states.
    Spectrum {
        /// Trained model file (JSON).
        #[arg(long)]
        model: PathBuf,
    },
    /// Estimate delay-embedding parameters (tau, d_E) for the observed
    /// series.
    EmbedParams,
}

fn run(cli: &Cli) -> nbeddyn_core::Result<()> {
    let config_path = cli.config.as_deref().ok_or_else(|| {
        nbeddyn_core::Error::invalid("--config <path> is required for this command")
    })?;
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dirs = RunDirs::create(&cli.out, &cfg.run_name)?;
    let console = Console { quiet: cli.quiet };
    console.say(format!("run directory: {}", dirs.root.display()));
    match &cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg, &dirs, &console),
        Command::Train => commands::cmd_train(&cfg, &dirs, &console),
        Command::Forecast {
            model,
            obs,
            horizon,
            truth,
        } => commands::cmd_forecast(
            &cfg,
            &dirs,
            &console,
            &ForecastArgs {
                model,
                obs,
                horizon: *horizon,
                truth: truth.as_deref(),
            },
        ),
        Command::Benchmark => benchmark::cmd_benchmark(&cfg, &dirs, &console),
        Command::Lyapunov { input, tau, dim } => commands::cmd_lyapunov(
            &cfg,
            &dirs,
            &console,
            &LyapunovArgs {
                input: input.as_deref(),
                tau: *tau,
                dim: *dim,
            },
        ),
        Command::Spectrum { model } => commands::cmd_spectrum(&dirs, &console, model),
        Command::EmbedParams => commands::cmd_embed_params(&cfg, &dirs, &console),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
