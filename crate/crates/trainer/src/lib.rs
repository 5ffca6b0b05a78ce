//! Supervised training of the policy networks on recorded demonstrations.

pub mod adam;
pub mod config;
pub mod curves;
pub mod data;
pub mod fit;

pub use adam::{adam_step, Adam};
pub use config::TrainConfig;
pub use curves::{export_curves, read_curves_csv, render_svg};
pub use data::PreparedData;
pub use fit::{fit, mse_loss, train, EarlyStopper, TrainReport, CHECKPOINT_FILE};

use macpilot_core::nn::EngineError;
use macpilot_core::zoo::ZooError;
use macpilot_dataset::DatasetError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0}")]
    Contract(String),
    #[error("training diverged in epoch {epoch}, batch {batch}: first non-finite output at {location}")]
    Diverged {
        epoch: usize,
        batch: usize,
        location: String,
    },
    #[error(transparent)]
    Model(#[from] ZooError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
