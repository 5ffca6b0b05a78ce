//! Deterministic 2.5D driving simulator: track geometry, a kinematic
//! bicycle model, a ray-cast RGB-D camera and lap timing.

pub mod camera;
pub mod export;
pub mod geometry;
pub mod lap;
pub mod sim;
pub mod track;
pub mod trackgen;
pub mod vehicle;

pub use camera::{render_camera, CameraConfig, Frame};
pub use geometry::Vec2;
pub use lap::{crosses_start_line, detect_lap_crossing, LapCounter};
pub use macpilot_core::ControlCommand;
pub use sim::{Simulator, TickEvents};
pub use track::{
    builtin_track, builtin_tracks, BoundaryKind, Cone, CurvatureZone, Palette, Projection, Segment,
    Track, TrackDefinition, BUILTIN_TRACKS,
};
pub use vehicle::{kinematics, lateral_offset, off_track, step, StepOutcome, VehicleParams, VehicleState, DT};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid track {0}")]
    InvalidTrack(String),
    #[error("unknown track {0:?}")]
    UnknownTrack(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}
