use macpilot_core::ControlCommand;
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::track::{BoundaryKind, Track};

/// Physics step, locked to the 20 Hz capture rate.
pub const DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub v_max: f64,
    pub max_steer: f64,
    /// Time constant of the first-order speed response.
    pub tau: f64,
    /// Half the body width; walls stop the car this far from the wall line.
    pub body_half_width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 0.3,
            v_max: 3.0,
            max_steer: 25f64.to_radians(),
            tau: 0.4,
            body_half_width: 0.08,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
    pub speed: f64,
    /// Front wheel angle in radians, positive to the right.
    pub steering_angle: f64,
    pub sim_time: f64,
    pub odometer: f64,
}

impl VehicleState {
    pub fn at(position: Vec2, heading: f64) -> VehicleState {
        VehicleState {
            position,
            heading,
            ..VehicleState::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    pub wall_contact: bool,
    /// The command was out of range and got clamped.
    pub input_clamped: bool,
}

/// Kinematic bicycle update without any track interaction.
///
/// Positive steering turns right, so with the counter-clockwise world frame
/// the yaw rate is `-v tan(delta) / L`.
pub fn kinematics(s: &VehicleState, cmd: &ControlCommand, dt: f64, p: &VehicleParams) -> VehicleState {
    let (cmd, _) = ControlCommand::clamped(cmd.steering, cmd.throttle);
    let delta = cmd.steering as f64 * p.max_steer;
    let target = cmd.throttle as f64 * p.v_max;
    let alpha = 1.0 - (-dt / p.tau).exp();
    let v = (s.speed + (target - s.speed) * alpha).clamp(0.0, p.v_max);
    let omega = -v * delta.tan() / p.wheelbase;
    let (x, y, th) = (s.position.x, s.position.y, s.heading);
    let (nx, ny, nth) = if omega == 0.0 {
        (x + v * dt * th.cos(), y + v * dt * th.sin(), th)
    } else {
        // exact integration along the arc
        let nth = th + omega * dt;
        let r = v / omega;
        (x + r * (nth.sin() - th.sin()), y - r * (nth.cos() - th.cos()), nth)
    };
    VehicleState {
        position: Vec2::new(nx, ny),
        heading: wrap_angle(nth),
        speed: v,
        steering_angle: delta,
        sim_time: s.sim_time + dt,
        odometer: s.odometer + v * dt,
    }
}

/// One physics step on `track`. Walls stop the car dead and hold it at the
/// boundary.
pub fn step(
    s: &VehicleState,
    cmd: &ControlCommand,
    dt: f64,
    track: &Track,
    p: &VehicleParams,
) -> StepOutcome {
    let (_, input_clamped) = ControlCommand::clamped(cmd.steering, cmd.throttle);
    let mut next = kinematics(s, cmd, dt, p);
    let mut wall_contact = false;
    if track.boundary_kind() == BoundaryKind::Walls {
        let limit = track.half_width() - p.body_half_width;
        let proj = track.project(next.position);
        if proj.offset.abs() > limit {
            wall_contact = true;
            next.position = proj.point + proj.tangent.perp() * (limit * proj.offset.signum());
            next.speed = 0.0;
        }
    }
    StepOutcome {
        state: next,
        wall_contact,
        input_clamped,
    }
}

pub fn lateral_offset(state: &VehicleState, track: &Track) -> f64 {
    track.lateral_offset_at(state.position)
}

pub fn off_track(state: &VehicleState, track: &Track) -> bool {
    track.off_track_at(state.position)
}
