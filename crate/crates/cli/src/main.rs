use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmnoma_cli::run;

/// Deterministic simulator comparing CSI-driven and camera-driven user
/// clustering in mmWave-NOMA downlinks.
#[derive(Parser)]
#[command(name = "mmnoma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled raster dataset and its manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (dataset.bin, dataset_manifest.txt).
        #[arg(long)]
        out: PathBuf,
        /// Number of samples; defaults to the config's n_train.
        #[arg(long)]
        samples: Option<usize>,
        /// Comma-separated seed list; the first seed drives generation.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Train the beam classifier on a dataset file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Input dataset (from gen-data).
        #[arg(long)]
        data: PathBuf,
        /// Output model path.
        #[arg(long)]
        model: PathBuf,
    },
    /// Print top-1 accuracy of a saved model on a held-out dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare CSI-driven and camera-driven scheduling over seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (compare.csv, compare_manifest.txt).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads for trial fan-out.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Sweep CSI staleness under user mobility.
    StaleSweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (stale_sweep.csv, stale_sweep_manifest.txt).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { config, out, samples, seeds } => {
            run::cmd_gen_data(&config, &out, samples, seeds)
        }
        Command::Train { config, data, model } => run::cmd_train(&config, &data, &model),
        Command::Evaluate { model, data } => run::cmd_evaluate(&model, &data),
        Command::Compare { config, out, seeds, jobs } => {
            run::cmd_compare(&config, &out, seeds, jobs)
        }
        Command::StaleSweep { config, out, seeds, jobs } => {
            run::cmd_stale_sweep(&config, &out, seeds, jobs)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
