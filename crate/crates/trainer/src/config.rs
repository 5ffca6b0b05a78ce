use serde::{Deserialize, Serialize};

use crate::TrainError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Frames per window.
    pub sequence_length: usize,
    pub window_stride: usize,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub train_fraction: f64,
    /// Network input size (width, height); frames are area-downscaled to it.
    pub input_size: [usize; 2],
    /// Feed the depth channel to the network.
    pub use_depth: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sequence_length: 5,
            window_stride: 1,
            seed: 0,
            early_stop_patience: 8,
            train_fraction: 0.8,
            input_size: [64, 48],
            use_depth: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.sequence_length == 0 || self.window_stride == 0 {
            return bad("epochs, batch_size, sequence_length and window_stride must be positive");
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return bad("learning_rate and epsilon must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        if self.input_size.contains(&0) {
            return bad("input_size must be positive");
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        if self.use_depth {
            4
        } else {
            3
        }
    }

    /// Per-frame network input shape `[C, H, W]`.
    pub fn input_shape(&self) -> [usize; 3] {
        [self.channels(), self.input_size[1], self.input_size[0]]
    }
}
