//! Layout generators for the shipped tracks. Only used to produce the JSON
//! files under `tracks/`; the simulator itself loads those files.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec2;
use crate::track::{BoundaryKind, Cone, Palette, Segment, Track, TrackDefinition};

/// Maximum spacing of centerline vertices.
pub const DISCRETIZATION: f64 = 0.1;

/// Closed polyline through `corners` with each corner replaced by a
/// tangent arc of the given radius. Starts halfway along the first edge.
pub fn filleted_loop(corners: &[Vec2], radii: &[f64]) -> Vec<Vec2> {
    let n = corners.len();
    assert_eq!(n, radii.len());
    // (arc start, arc end, center, start angle, sweep) per corner
    let arcs: Vec<(Vec2, Vec2, Vec2, f64, f64)> = (0..n)
        .map(|i| {
            let p = corners[i];
            let d_in = (p - corners[(i + n - 1) % n]).normalized();
            let d_out = (corners[(i + 1) % n] - p).normalized();
            let turn = d_in.cross(d_out).atan2(d_in.dot(d_out));
            let r = radii[i];
            let l = r * (turn.abs() / 2.0).tan();
            let a = p - d_in * l;
            let b = p + d_out * l;
            let side = turn.signum();
            let center = a + d_in.perp() * (r * side);
            let start = (a - center).y.atan2((a - center).x);
            (a, b, center, start, turn)
        })
        .collect();
    for i in 0..n {
        let edge = corners[i].dist(corners[(i + 1) % n]);
        let used = arcs[i].0.dist(corners[i]) + arcs[(i + 1) % n].0.dist(corners[(i + 1) % n]);
        assert!(used <= edge + 1e-9, "fillets overlap on edge {i}");
    }
    let mut out = Vec::new();
    let mut push = |p: Vec2, out: &mut Vec<Vec2>| {
        if out.last().is_none_or(|q: &Vec2| q.dist(p) > 1e-9) {
            out.push(p);
        }
    };
    let straight = |from: Vec2, to: Vec2, out: &mut Vec<Vec2>, push: &mut dyn FnMut(Vec2, &mut Vec<Vec2>)| {
        let len = from.dist(to);
        let k = (len / DISCRETIZATION).ceil().max(1.0) as usize;
        for j in 0..k {
            push(from + (to - from) * (j as f64 / k as f64), out);
        }
    };
    for i in 0..n {
        let next = (i + 1) % n;
        let mid = corners[i] + (corners[next] - corners[i]) * 0.5;
        // second half of edge i, arc at corner i+1, first half of edge i+1
        straight(mid, arcs[next].0, &mut out, &mut push);
        let (_, _, c, start, sweep) = arcs[next];
        let r = radii[next];
        let k = ((r * sweep.abs()) / DISCRETIZATION).ceil().max(1.0) as usize;
        for j in 0..k {
            let a = start + sweep * (j as f64 / k as f64);
            push(c + Vec2::from_angle(a) * r, &mut out);
        }
        let next_mid = corners[next] + (corners[(next + 1) % n] - corners[next]) * 0.5;
        straight(arcs[next].1, next_mid, &mut out, &mut push);
    }
    out
}

/// Start line across vertex 0, reaching `reach` beyond the band edge.
fn start_line(pts: &[Vec2], half_width: f64, reach: f64) -> Segment {
    let t = (pts[1] - pts[0]).normalized();
    let nrm = t.perp();
    let w = half_width + reach;
    Segment {
        a: pts[0] + nrm * w,
        b: pts[0] - nrm * w,
    }
}

pub fn oval() -> TrackDefinition {
    let corners = [
        Vec2::new(0.0, 0.0),
        Vec2::new(9.0, 0.0),
        Vec2::new(9.0, 4.0),
        Vec2::new(0.0, 4.0),
    ];
    let pts = filleted_loop(&corners, &[2.0; 4]);
    let hw = 0.6;
    TrackDefinition {
        id: "oval".into(),
        start_finish: start_line(&pts, hw, 0.3),
        centerline: pts,
        half_width: hw,
        boundary_kind: BoundaryKind::Walls,
        obstacles: Vec::new(),
        palette: Palette::default(),
        seed: None,
    }
}

pub fn mini_monaco() -> TrackDefinition {
    let s = 1.15;
    let corners: Vec<Vec2> = [
        (0.0, 0.0),
        (15.0, 0.0),
        (15.0, 5.0),
        (11.0, 5.0),
        (9.0, 8.0),
        (4.0, 8.0),
        (4.0, 4.0),
        (0.0, 4.0),
    ]
    .iter()
    .map(|&(x, y)| Vec2::new(x * s, y * s))
    .collect();
    let radii = [1.1, 1.2, 1.2, 1.5, 1.5, 1.1, 1.1, 1.1];
    let pts = filleted_loop(&corners, &radii);
    let hw = 0.6;
    TrackDefinition {
        id: "mini_monaco_2d".into(),
        start_finish: start_line(&pts, hw, 0.3),
        centerline: pts,
        half_width: hw,
        boundary_kind: BoundaryKind::Walls,
        obstacles: Vec::new(),
        palette: Palette {
            road: [70, 70, 78],
            wall: [220, 220, 225],
            ..Palette::default()
        },
        seed: None,
    }
}

pub const GENERATED_SEED: u64 = 20_240_917;

/// Random star-shaped loop with cones scattered outside the band.
pub fn generated(seed: u64) -> TrackDefinition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 7;
    let corners: Vec<Vec2> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * (k as f64 + rng.gen_range(-0.15..0.15)) / n as f64;
            let r = rng.gen_range(3.0..4.2);
            Vec2::from_angle(a) * r
        })
        .collect();
    let radii: Vec<f64> = (0..n)
        .map(|i| {
            let e_in = corners[i].dist(corners[(i + n - 1) % n]);
            let e_out = corners[i].dist(corners[(i + 1) % n]);
            let d_in = (corners[i] - corners[(i + n - 1) % n]).normalized();
            let d_out = (corners[(i + 1) % n] - corners[i]).normalized();
            let half = (d_in.cross(d_out).atan2(d_in.dot(d_out)).abs() / 2.0).tan();
            let fit = 0.45 * e_in.min(e_out) / half.max(1e-6);
            rng.gen_range(1.2..1.8f64).min(fit)
        })
        .collect();
    let pts = filleted_loop(&corners, &radii);
    let hw = 0.6;
    let probe = Track::new(TrackDefinition {
        id: "probe".into(),
        start_finish: start_line(&pts, hw, 0.3),
        centerline: pts.clone(),
        half_width: hw,
        boundary_kind: BoundaryKind::Open,
        obstacles: Vec::new(),
        palette: Palette::default(),
        seed: None,
    })
    .expect("generated layout is valid");
    let mut cones: Vec<Cone> = Vec::new();
    while cones.len() < 24 {
        let s = rng.gen_range(0.0..probe.length());
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let off = rng.gen_range(hw + 0.3..hw + 1.4);
        let (p, t) = probe.point_at(s);
        let c = Cone {
            position: p + t.perp() * (side * off),
            radius: 0.08,
        };
        let clear = probe.lateral_offset_at(c.position).abs() - c.radius > hw + 0.15;
        let apart = cones.iter().all(|o| o.position.dist(c.position) > 0.5);
        // keep the start area free
        let near_start = p.dist(pts[0]) < 1.5;
        if clear && apart && !near_start {
            cones.push(c);
        }
    }
    TrackDefinition {
        id: "generated_track_2d".into(),
        start_finish: start_line(&pts, hw, 0.3),
        centerline: pts,
        half_width: hw,
        boundary_kind: BoundaryKind::Open,
        obstacles: cones,
        palette: Palette {
            ground: [190, 170, 120],
            road: [105, 100, 95],
            ..Palette::default()
        },
        seed: Some(seed),
    }
}
