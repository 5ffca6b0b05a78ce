use serde::{Deserialize, Serialize};

use crate::geometry::{ray_circle, ray_segment, Vec2};
use crate::track::Track;
use crate::vehicle::VehicleState;
use crate::SimError;

pub const WALL_HEIGHT: f64 = 0.25;
pub const CONE_HEIGHT: f64 = 0.2;
/// Width of the painted edge line inside the band.
pub const EDGE_LINE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub mount_height: f64,
    pub far_clip: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 160,
            height: 120,
            fov_deg: 120.0,
            mount_height: 0.1,
            far_clip: 12.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.width == 0 || self.height == 0 {
            return Err(SimError::Config(format!(
                "viewport {}x{} is empty",
                self.width, self.height
            )));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(SimError::Config(format!("field of view {} out of range", self.fov_deg)));
        }
        if !(self.far_clip > 0.0 && self.mount_height > 0.0) {
            return Err(SimError::Config("far clip and mount height must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.width as f64 / 2.0 / (self.fov_deg.to_radians() / 2.0).tan()
    }
}

/// One RGB-D image. `rgb` is row-major interleaved, `depth` in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    pub depth: Vec<f32>,
    pub frame_index: u64,
    pub timestamp: f64,
}

impl Frame {
    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

fn shade(c: [u8; 3], dist: f64, far: f64) -> [u8; 3] {
    let k = 1.0 - 0.55 * (dist / far).min(1.0);
    c.map(|v| (v as f64 * k).round() as u8)
}

/// Column-wise ray cast of walls and cones over a flat floor.
pub fn render_camera(
    state: &VehicleState,
    track: &Track,
    cfg: &CameraConfig,
    frame_index: u64,
) -> Result<Frame, SimError> {
    cfg.validate()?;
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let far = cfg.far_clip;
    let f = cfg.focal();
    let tan_half = (cfg.fov_deg.to_radians() / 2.0).tan();
    let fwd = Vec2::from_angle(state.heading);
    let left = fwd.perp();
    let pal = track.palette();
    let hw = track.half_width();
    let mut rgb = vec![0u8; w * h * 3];
    let mut depth = vec![far as f32; w * h];
    let horizon = h as f64 / 2.0;
    let mut cones: Vec<(f64, usize)> = Vec::new();

    for x in 0..w {
        // exact mirror symmetry: column x and w-1-x get opposite offsets
        let u = (2 * x as i64 + 1 - w as i64) as f64 / w as f64;
        let lateral = -u * tan_half;
        let dir = fwd + left * lateral;

        let wall = track
            .walls()
            .iter()
            .filter_map(|s| ray_segment(state.position, dir, s.a, s.b))
            .fold(f64::INFINITY, f64::min);
        let wall = (wall <= far).then_some(wall);

        cones.clear();
        for (k, c) in track.cones().iter().enumerate() {
            if let Some(t) = ray_circle(state.position, dir, c.position, c.radius) {
                if t <= far && wall.is_none_or(|wd| t < wd) {
                    cones.push((t, k));
                }
            }
        }
        cones.sort_by(|a, b| b.0.total_cmp(&a.0));

        for y in 0..h {
            let dy = y as f64 + 0.5 - horizon;
            let idx = y * w + x;
            let mut color = if dy < 0.0 {
                pal.sky
            } else {
                let d = cfg.mount_height * f / dy;
                let p = state.position + dir * d;
                let off = track.floor_distance(p) as f64;
                let base = if off <= hw - EDGE_LINE {
                    pal.road
                } else if off <= hw {
                    pal.line
                } else {
                    pal.ground
                };
                shade(base, d, far)
            };
            let mut z_depth = far;
            // an object at distance t covers heights [0, top] at this row
            let covers = |t: f64, top: f64| {
                let z = cfg.mount_height - dy * t / f;
                (0.0..=top).contains(&z)
            };
            if let Some(t) = wall {
                if covers(t, WALL_HEIGHT) {
                    color = shade(pal.wall, t, far);
                    z_depth = t;
                }
            }
            for &(t, _) in &cones {
                if covers(t, CONE_HEIGHT) {
                    color = shade(pal.cone, t, far);
                    z_depth = t;
                }
            }
            rgb[idx * 3..idx * 3 + 3].copy_from_slice(&color);
            depth[idx] = z_depth.min(far) as f32;
        }
    }
    Ok(Frame {
        width: cfg.width,
        height: cfg.height,
        rgb,
        depth,
        frame_index,
        timestamp: state.sim_time,
    })
}
