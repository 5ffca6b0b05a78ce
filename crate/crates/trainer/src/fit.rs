use std::path::{Path, PathBuf};
use std::time::Instant;

use macpilot_core::nn::{EngineError, NormMode, Tape, Tensor};
use macpilot_core::zoo::{save_checkpoint, Model, TrainingMetadata, ZooError};
use macpilot_dataset::{make_windows, Dataset, Window};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, Adam};
use crate::config::TrainConfig;
use crate::data::PreparedData;
use crate::TrainError;

pub const CHECKPOINT_FILE: &str = "model.mpck";

/// Validation loss above this multiple of the training loss at the best
/// epoch is reported as overfitting.
pub const OVERFIT_RATIO: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// 1-based.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Validation over training loss at the best epoch.
    pub overfit_ratio: f64,
    pub overfitting: bool,
    pub stopped_early: bool,
    /// Share of parameter tensors that received a gradient in the first step.
    pub gradient_coverage: f64,
    pub checkpoint: Option<PathBuf>,
}

/// Mean squared error over all elements of two equally shaped tensors.
pub fn mse_loss(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<f32, TrainError> {
    let mut tape = Tape::new();
    let p = tape.input(pred.clone());
    let t = tape.input(target.clone());
    let l = tape.mse_loss(p, t)?;
    Ok(tape.value(l).item())
}

/// Patience counter over validation losses.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    pub best: f64,
    pub since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    /// Records one epoch. Returns `(improved, stop)`.
    pub fn observe(&mut self, val: f64) -> (bool, bool) {
        if val < self.best {
            self.best = val;
            self.since_best = 0;
            (true, false)
        } else {
            self.since_best += 1;
            (false, self.since_best >= self.patience)
        }
    }
}

/// Mean loss of `windows` with batch-norm in inference mode.
fn evaluate(model: &Model, data: &PreparedData, windows: &[Window], batch: usize) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    for chunk in windows.chunks(batch) {
        let (x, y) = data.batch(chunk);
        let pred = model.predict(&x)?;
        sum += mse_loss(&pred, &y)? as f64 * chunk.len() as f64;
    }
    Ok(sum / windows.len() as f64)
}

/// Trains on explicit windows. The model ends up holding the weights of the
/// best validation epoch; with `out` set they are also written there as
/// [`CHECKPOINT_FILE`] whenever validation improves.
pub fn fit(
    model: &mut Model,
    data: &PreparedData,
    train: &[Window],
    val: &[Window],
    cfg: &TrainConfig,
    out: Option<&Path>,
    metadata: &TrainingMetadata,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Contract(format!(
            "need at least one training and one validation window, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    if model.window_shape()[1..] != data.frame_shape || model.window_shape()[0] != train[0].len {
        return Err(TrainError::Config(format!(
            "model expects windows {:?}, data gives {} frames of {:?}",
            model.window_shape(),
            train[0].len,
            data.frame_shape
        )));
    }
    let checkpoint = out.map(|d| d.join(CHECKPOINT_FILE));
    if let Some(d) = out {
        std::fs::create_dir_all(d)?;
    }
    let n_params = model.params().len();
    let mut opt = Adam::new(model.params().iter().map(|p| p.value.numel()), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = train.to_vec();
    let mut stopper = EarlyStopper::new(cfg.early_stop_patience);
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        epoch_seconds: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        overfit_ratio: f64::NAN,
        overfitting: false,
        stopped_early: false,
        gradient_coverage: 0.0,
        checkpoint: None,
    };
    let mut best = model.clone();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = data.batch(chunk);
            let diverged = |tape: &Tape<f32>| TrainError::Diverged {
                epoch,
                batch: b,
                location: if !x.is_finite() {
                    "the input batch".to_string()
                } else {
                    tape.first_non_finite_labeled()
                        .or_else(|| tape.first_non_finite())
                        .map_or_else(|| "the loss".to_string(), |(_, d)| d)
                },
            };
            let mut tape = Tape::new();
            let pred = match model.forward(&mut tape, &x, NormMode::Training) {
                Ok(p) => p,
                // convolutions refuse non-finite inputs outright
                Err(ZooError::Engine(EngineError::NonFinite { .. })) => return Err(diverged(&tape)),
                Err(e) => return Err(e.into()),
            };
            let target = tape.input(y);
            let loss = tape.mse_loss(pred, target)?;
            let l = tape.value(loss).item();
            if !l.is_finite() {
                return Err(diverged(&tape));
            }
            tape.backward(loss)?;
            let mut grads: Vec<Option<&[f32]>> = vec![None; n_params];
            for (slot, g) in tape.param_grads() {
                grads[slot] = Some(g);
            }
            if epoch == 1 && b == 0 {
                report.gradient_coverage =
                    grads.iter().filter(|g| g.is_some()).count() as f64 / n_params.max(1) as f64;
            }
            let mut params: Vec<&mut Tensor<f32>> =
                model.params_mut().iter_mut().map(|p| &mut p.value).collect();
            adam_step(&mut params, &grads, &mut opt);
            sum += l as f64 * chunk.len() as f64;
        }
        let train_loss = sum / order.len() as f64;
        let val_loss = evaluate(model, data, val, cfg.batch_size)?;
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        let (improved, stop) = stopper.observe(val_loss);
        if improved {
            best = model.clone();
            report.best_epoch = epoch;
            report.best_val_loss = val_loss;
            report.overfit_ratio = val_loss / train_loss;
            if let Some(path) = &checkpoint {
                let meta = TrainingMetadata {
                    epochs: epoch,
                    final_train_loss: Some(train_loss),
                    final_val_loss: Some(val_loss),
                    ..metadata.clone()
                };
                save_checkpoint(model, &meta, path)?;
                report.checkpoint = Some(path.clone());
            }
        }
        if stop {
            report.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    report.overfitting = report.overfit_ratio > OVERFIT_RATIO;
    *model = best;
    Ok(report)
}

/// Splits `ds`, windows both parts and trains `model` on them.
pub fn train(
    model: &mut Model,
    ds: &Dataset,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let shape = cfg.input_shape();
    if model.config().input_shape != shape || model.config().sequence_length != cfg.sequence_length {
        return Err(TrainError::Config(format!(
            "model takes {} frames of {:?}, config asks for {} frames of {:?}",
            model.config().sequence_length,
            model.config().input_shape,
            cfg.sequence_length,
            shape
        )));
    }
    let (train_view, val_view) = ds.split(cfg.train_fraction)?;
    let train_w = make_windows(&train_view, cfg.sequence_length, cfg.window_stride, None)?;
    let val_w = make_windows(&val_view, cfg.sequence_length, cfg.window_stride, None)?;
    let data = PreparedData::from_dataset(ds, shape)?;
    let m = ds.manifest();
    let metadata = TrainingMetadata {
        epochs: 0,
        final_train_loss: None,
        final_val_loss: None,
        dataset_id: format!("{}:{:08x}:{:08x}", m.track_id, m.frames_crc32, m.samples_crc32),
        seed: cfg.seed,
        training: serde_json::to_value(cfg).expect("config serializes"),
    };
    fit(model, &data, &train_w.windows, &val_w.windows, cfg, out, &metadata)
}
