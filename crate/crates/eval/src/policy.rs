use std::collections::VecDeque;

use macpilot_core::nn::Tensor;
use macpilot_core::zoo::Model;
use macpilot_core::ControlCommand;
use macpilot_dataset::{frame_to_input, InputSpec};
use macpilot_sim::{CameraConfig, Frame, Track, VehicleParams, VehicleState};

use crate::EvalError;

/// Anything that can drive the car.
pub trait Policy {
    /// Whether [`Policy::act`] looks at the camera. The lap loop skips
    /// rendering otherwise.
    fn needs_frame(&self) -> bool {
        true
    }

    fn reset(&mut self) {}

    /// `frame` is `None` only when `needs_frame` is false.
    fn act(&mut self, frame: Option<&Frame>, state: &VehicleState, track: &Track) -> ControlCommand;
}

/// Pure pursuit on the centerline at a fixed throttle. Privileged: it reads
/// the true pose.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePolicy {
    pub throttle: f32,
    pub lookahead: f64,
    pub vehicle: VehicleParams,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        OraclePolicy {
            throttle: 0.5,
            lookahead: 0.5,
            vehicle: VehicleParams::default(),
        }
    }
}

impl OraclePolicy {
    pub fn steering(&self, state: &VehicleState, track: &Track) -> f32 {
        let s = track.project(state.position).s;
        let (target, _) = track.point_at(s + self.lookahead);
        let d = target - state.position;
        let alpha = d.y.atan2(d.x) - state.heading;
        let alpha = alpha.sin().atan2(alpha.cos());
        let delta = (2.0 * self.vehicle.wheelbase * alpha.sin() / d.norm().max(1e-6)).atan();
        // positive normalized steering turns right
        (-delta / self.vehicle.max_steer).clamp(-1.0, 1.0) as f32
    }
}

impl Policy for OraclePolicy {
    fn needs_frame(&self) -> bool {
        false
    }

    fn act(&mut self, _: Option<&Frame>, state: &VehicleState, track: &Track) -> ControlCommand {
        ControlCommand::new(self.steering(state, track), self.throttle)
    }
}

/// Whether a model's per-frame input can be produced from `camera` frames by
/// area downscaling.
pub fn check_compatible(model: &Model, camera: &CameraConfig) -> Result<(), EvalError> {
    let [c, h, w] = model.config().input_shape;
    let (cw, ch) = (camera.width as usize, camera.height as usize);
    if !(c == 3 || c == 4) || w > cw || h > ch || w * ch != h * cw {
        return Err(EvalError::Config(format!(
            "model input [C,H,W] = [{c}, {h}, {w}] cannot be made from camera frames [4, {ch}, {cw}]"
        )));
    }
    Ok(())
}

/// Runs a network on a sliding window of the latest frames. Until enough
/// frames exist the first one is repeated.
#[derive(Clone, Debug)]
pub struct ModelPolicy {
    model: Model,
    spec: InputSpec,
    frames: VecDeque<Vec<f32>>,
}

impl ModelPolicy {
    pub fn new(model: Model, camera: &CameraConfig) -> Result<ModelPolicy, EvalError> {
        check_compatible(&model, camera)?;
        let spec = InputSpec::from_shape(model.config().input_shape, camera.far_clip);
        Ok(ModelPolicy {
            model,
            spec,
            frames: VecDeque::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }
}

impl Policy for ModelPolicy {
    fn reset(&mut self) {
        self.frames.clear();
    }

    fn act(&mut self, frame: Option<&Frame>, _: &VehicleState, _: &Track) -> ControlCommand {
        let frame = frame.expect("model policy needs frames");
        let t = self.model.config().sequence_length;
        let x = frame_to_input(frame, &self.spec);
        if self.frames.is_empty() {
            for _ in 1..t {
                self.frames.push_back(x.clone());
            }
        }
        self.frames.push_back(x);
        while self.frames.len() > t {
            self.frames.pop_front();
        }
        let data: Vec<f32> = self.frames.iter().flatten().copied().collect();
        let [c, h, w] = self.model.config().input_shape;
        let window = Tensor::new(&[t, c, h, w], data).expect("window shape");
        self.model
            .forward_policy(&window)
            .expect("window shape was checked at construction")
    }
}
