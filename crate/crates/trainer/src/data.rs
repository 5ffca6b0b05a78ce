use macpilot_core::nn::Tensor;
use macpilot_dataset::{frame_to_input, Dataset, InputSpec, Window};

use crate::TrainError;

/// Every sample preprocessed to network input once, plus its command.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    /// Per-frame shape `[C, H, W]`.
    pub frame_shape: [usize; 3],
    pub inputs: Vec<f32>,
    pub targets: Vec<[f32; 2]>,
}

impl PreparedData {
    pub fn from_dataset(ds: &Dataset, frame_shape: [usize; 3]) -> Result<PreparedData, TrainError> {
        let spec = InputSpec::from_shape(frame_shape, ds.manifest().camera.far_clip);
        let mut inputs = Vec::with_capacity(ds.len() * spec.numel());
        let mut targets = Vec::with_capacity(ds.len());
        for (i, s) in ds.samples().iter().enumerate() {
            inputs.extend(frame_to_input(&ds.frame(i)?, &spec));
            targets.push([s.steering, s.throttle]);
        }
        Ok(PreparedData {
            frame_shape,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn frame_numel(&self) -> usize {
        self.frame_shape.iter().product()
    }

    /// `[N, T, C, H, W]` inputs and `[N, 2]` targets for `windows`.
    pub fn batch(&self, windows: &[Window]) -> (Tensor<f32>, Tensor<f32>) {
        let t = windows.first().map_or(1, |w| w.len);
        let n = self.frame_numel();
        let mut x = Vec::with_capacity(windows.len() * t * n);
        let mut y = Vec::with_capacity(windows.len() * 2);
        for w in windows {
            assert_eq!(w.len, t, "mixed window lengths in one batch");
            for k in w.indices() {
                x.extend_from_slice(&self.inputs[k * n..(k + 1) * n]);
            }
            y.extend_from_slice(&self.targets[w.target()]);
        }
        let [c, h, wd] = self.frame_shape;
        (
            Tensor::new(&[windows.len(), t, c, h, wd], x).expect("batch shape"),
            Tensor::new(&[windows.len(), 2], y).expect("target shape"),
        )
    }
}
