#![allow(dead_code)]

use std::sync::Arc;

use macpilot_sim::trackgen::filleted_loop;
use macpilot_sim::{BoundaryKind, Cone, Palette, Segment, Track, TrackDefinition, Vec2};

/// Stadium loop whose first straight runs along y = 0 in +x, from
/// x = -half_len to half_len.
pub fn stadium(half_len: f64, radius: f64, hw: f64, kind: BoundaryKind, cones: Vec<Cone>) -> Track {
    let gap = 2.0 * radius + 2.0 * hw + 1.0;
    let corners = [
        Vec2::new(-half_len - radius, 0.0),
        Vec2::new(half_len + radius, 0.0),
        Vec2::new(half_len + radius, gap),
        Vec2::new(-half_len - radius, gap),
    ];
    let pts = filleted_loop(&corners, &[radius; 4]);
    let reach = hw + 0.3;
    Track::new(TrackDefinition {
        id: "stadium".into(),
        start_finish: Segment {
            a: Vec2::new(pts[0].x, reach),
            b: Vec2::new(pts[0].x, -reach),
        },
        centerline: pts,
        half_width: hw,
        boundary_kind: kind,
        obstacles: cones,
        palette: Palette::default(),
        seed: None,
    })
    .unwrap()
}

pub fn oval() -> Arc<Track> {
    Arc::new(macpilot_sim::builtin_track("oval").unwrap())
}

pub fn cmd(steering: f32, throttle: f32) -> macpilot_sim::ControlCommand {
    macpilot_sim::ControlCommand { steering, throttle }
}

/// Steers toward a point `look` meters ahead along the centerline.
pub fn follow(track: &Track, pos: Vec2, heading: f64, look: f64, max_steer: f64, wheelbase: f64) -> f32 {
    let s = track.project(pos).s;
    let (target, _) = track.point_at(s + look);
    let d = target - pos;
    let alpha = d.y.atan2(d.x) - heading;
    let alpha = alpha.sin().atan2(alpha.cos());
    let delta = (2.0 * wheelbase * alpha.sin() / d.norm()).atan();
    // positive steering is to the right
    (-delta / max_steer).clamp(-1.0, 1.0) as f32
}
