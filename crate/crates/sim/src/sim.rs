use std::sync::Arc;

use macpilot_core::ControlCommand;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{render_camera, CameraConfig, Frame};
use crate::geometry::Vec2;
use crate::lap::LapCounter;
use crate::track::Track;
use crate::vehicle::{step, VehicleParams, VehicleState, DT};
use crate::SimError;

/// Distance past the start line where cars are placed.
pub const SPAWN_AHEAD: f64 = 0.75;

/// What happened during one [`Simulator::tick`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickEvents {
    pub wall_contact: bool,
    pub off_track: bool,
    pub lap_crossing: bool,
    pub input_clamped: bool,
    pub lateral_offset: f64,
}

/// One car on one track, stepped at the fixed rate.
#[derive(Clone, Debug)]
pub struct Simulator {
    track: Arc<Track>,
    camera: CameraConfig,
    params: VehicleParams,
    state: VehicleState,
    laps: LapCounter,
    ticks: u64,
}

impl Simulator {
    /// Places the car just past the start line with a small pose jitter
    /// drawn from `seed`.
    pub fn new(track: Arc<Track>, camera: CameraConfig, seed: u64) -> Result<Simulator, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, heading) = track.spawn_pose(SPAWN_AHEAD);
        let (_, t) = track.point_at(track.start_s() + SPAWN_AHEAD);
        let lateral = rng.gen_range(-0.05..=0.05);
        let yaw = rng.gen_range(-0.03..=0.03);
        let state = VehicleState::at(p + t.perp() * lateral, heading + yaw);
        Simulator::from_state(track, camera, state)
    }

    pub fn from_state(
        track: Arc<Track>,
        camera: CameraConfig,
        state: VehicleState,
    ) -> Result<Simulator, SimError> {
        camera.validate()?;
        Ok(Simulator {
            laps: LapCounter::new(state.odometer),
            track,
            camera,
            params: VehicleParams::default(),
            state,
            ticks: 0,
        })
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn track(&self) -> &Arc<Track> {
        &self.track
    }

    pub fn camera(&self) -> &CameraConfig {
        &self.camera
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn laps(&self) -> &LapCounter {
        &self.laps
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Camera image of the current state.
    pub fn render(&self) -> Frame {
        render_camera(&self.state, &self.track, &self.camera, self.ticks)
            .expect("camera validated at construction")
    }

    pub fn tick(&mut self, cmd: ControlCommand) -> TickEvents {
        let out = step(&self.state, &cmd, DT, &self.track, &self.params);
        let lap_crossing = self.laps.update(&self.state, &out.state, &self.track);
        self.state = out.state;
        self.ticks += 1;
        let proj = self.track.project(self.state.position);
        TickEvents {
            wall_contact: out.wall_contact,
            off_track: proj.offset.abs() > self.track.half_width(),
            lap_crossing,
            input_clamped: out.input_clamped,
            lateral_offset: proj.offset,
        }
    }

    /// Teleports the car, e.g. for tests.
    pub fn set_pose(&mut self, position: Vec2, heading: f64) {
        self.state.position = position;
        self.state.heading = heading;
    }
}
