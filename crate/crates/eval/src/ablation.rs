use std::path::{Path, PathBuf};
use std::sync::Arc;

use macpilot_core::zoo::{load_checkpoint, parameter_count, ArchitectureConfig, Model, TrainingMetadata};
use macpilot_dataset::Dataset;
use macpilot_sim::Track;
use macpilot_train::{train, TrainConfig, TrainReport};

use crate::policy::ModelPolicy;
use crate::run::{run_laps, EvalOptions, LapReport};
use crate::table::{compare, ComparisonTable};
use crate::EvalError;

/// The residual 3D-CNN and its one-block-shorter and one-block-longer
/// siblings.
pub const ABLATION_VARIANTS: [&str; 3] = ["cnn3d_modified_minus1", "cnn3d_modified", "cnn3d_modified_plus1"];

#[derive(Clone, Debug)]
pub struct VariantOutcome {
    pub name: String,
    pub parameter_count: usize,
    pub checkpoint: PathBuf,
    pub metadata: TrainingMetadata,
    pub training: TrainReport,
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub table: ComparisonTable,
    pub reports: Vec<LapReport>,
    pub variants: Vec<VariantOutcome>,
}

/// Trains every variant with the same config, seed and data (checkpoints
/// under `out/<variant>/`), then runs each on `track`.
pub fn ablation_run(
    base: &TrainConfig,
    ds: &Dataset,
    track: Arc<Track>,
    n_laps: usize,
    eval_seed: u64,
    opts: &EvalOptions,
    out: &Path,
) -> Result<AblationResult, EvalError> {
    let mut variants = Vec::new();
    let mut reports = Vec::new();
    for name in ABLATION_VARIANTS {
        let cfg = ArchitectureConfig::builtin(name, base.input_shape())?;
        let mut model = Model::build(&cfg, base.seed)?;
        let dir = out.join(name);
        std::fs::create_dir_all(&dir)?;
        log::info!("ablation: training {name}");
        let training = train(&mut model, ds, base, Some(&dir))?;
        let checkpoint = training
            .checkpoint
            .clone()
            .ok_or_else(|| EvalError::Config(format!("{name} produced no checkpoint")))?;
        let (best, metadata) = load_checkpoint(&checkpoint)?;
        log::info!("ablation: evaluating {name}");
        let mut policy = ModelPolicy::new(best, &opts.camera)?;
        reports.push(run_laps(&mut policy, name, track.clone(), n_laps, eval_seed, opts)?);
        variants.push(VariantOutcome {
            name: name.to_string(),
            parameter_count: parameter_count(&model),
            checkpoint,
            metadata,
            training,
        });
    }
    Ok(AblationResult {
        table: compare(&reports),
        reports,
        variants,
    })
}
