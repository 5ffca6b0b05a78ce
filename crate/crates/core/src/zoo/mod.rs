//! Architecture configurations, model construction and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod model;

use thiserror::Error;

use crate::nn::EngineError;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    TrainingMetadata,
};
pub use config::{Activation, ArchitectureConfig, LayerSpec, ShapeKind, BUILTIN_NAMES};
pub use model::{parameter_count, Model, NormBuffer, Param};

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("layer {layer}: {detail}")]
    Config { layer: usize, detail: String },
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated in {0}")]
    Truncated(String),
    #[error("checksum mismatch in blob {0}")]
    Checksum(String),
    #[error("blob {blob}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        blob: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint lacks blob {0}")]
    MissingBlob(String),
    #[error("checkpoint has unexpected blob {0}")]
    UnexpectedBlob(String),
    #[error("checkpoint config differs in {field}: holds {found:?}, wanted {expected:?}")]
    ConfigMismatch {
        field: String,
        found: String,
        expected: String,
    },
}

pub type Result<T> = std::result::Result<T, ZooError>;
