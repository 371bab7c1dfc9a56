//! Experiment runner CLI: dispatches declarative configs to the analysis
//! pipelines and emits deterministic CSV/JSON tables.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qelm::pipeline::{
    run_capacity, run_decodability, run_flowmap, run_forecast, run_spreading, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "qelm", version, about = "QELM simulation and analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config; flags override config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Operator-spreading profiles (weight averages and sector masses).
    Spreading,
    /// Feature decodability sweep over multiplexing length.
    Decode,
    /// Nonlinear capacity curves, absolute and relative.
    Capacity,
    /// Train a forecaster and measure training error and forecast horizon.
    Forecast,
    /// Extract the learned flow map and compare with the Lie-series truth.
    Flowmap,
}

fn run(cli: &Cli) -> qelm::Result<Vec<PathBuf>> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| qelm::QelmError::Contract(format!("thread pool setup failed: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Spreading => run_spreading(&config, &cli.out),
        Command::Decode => run_decodability(&config, &cli.out),
        Command::Capacity => run_capacity(&config, &cli.out),
        Command::Forecast => run_forecast(&config, &cli.out),
        Command::Flowmap => run_flowmap(&config, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let payload = serde_json::json!({
                "error": err.to_string(),
                "kind": format!("{err:?}").split(['(', ' ']).next().unwrap_or("Unknown"),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
