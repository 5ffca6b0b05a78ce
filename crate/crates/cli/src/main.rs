//! `macpilot`: the whole workflow from one binary.

mod commands;
mod error;
mod manifest;
mod setup;

use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Behavior cloning for mini autonomous cars: record, train, evaluate.
#[derive(Debug, Parser)]
#[command(name = "macpilot", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for every random choice of this run.
    #[arg(long, env = "MACPILOT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Built-in track id or path to a track JSON file.
    #[arg(long, default_value = "mini_monaco_2d")]
    pub track: String,
    #[arg(long, default_value_t = 8700)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory with the browser client, served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub tick_rate: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the simulator for manual driving and record into --out.
    Record {
        #[command(flatten)]
        serve: ServeArgs,
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Record scripted demonstrations driven by the centerline oracle.
    Demo {
        #[arg(long, default_value = "oval")]
        track: String,
        #[arg(long)]
        out: PathBuf,
        /// Timed laps after the run-in from the spawn point.
        #[arg(long, default_value_t = 3)]
        laps: usize,
        /// Standard deviation of the steering disturbance.
        #[arg(long, default_value_t = 0.15)]
        noise: f32,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train one architecture on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// rnn_default, rnn_modified, cnn3d_default, cnn3d_modified, ...
        #[arg(long)]
        arch: String,
        /// JSON training config; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run checkpoints for laps and print the comparison table.
    Evaluate {
        /// Repeat to compare several models.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        /// Repeat to evaluate on several tracks.
        #[arg(long, required = true)]
        track: Vec<String>,
        #[arg(long, default_value_t = 30)]
        laps: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Where to write reports and tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the residual 3D-CNN with one block less and more.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "mini_monaco_2d")]
        track: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 30)]
        laps: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a dataset.
    Inspect {
        dataset: PathBuf,
        /// Also check every frame checksum.
        #[arg(long)]
        verify: bool,
    },
    /// Finalize a recording that was interrupted.
    Recover { dataset: PathBuf },
    /// Serve the simulator to browser clients.
    Serve {
        #[command(flatten)]
        serve: ServeArgs,
        /// Recordings and checkpoints named by clients live below this.
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
