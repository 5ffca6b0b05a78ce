use serde::{Deserialize, Serialize};

use crate::geometry::{closest_on_segment, segment_intersection, Vec2};
use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Walls,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub position: Vec2,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub road: [u8; 3],
    pub line: [u8; 3],
    pub wall: [u8; 3],
    pub cone: [u8; 3],
    pub ground: [u8; 3],
    pub sky: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            road: [90, 90, 96],
            line: [235, 235, 235],
            wall: [190, 60, 45],
            cone: [250, 130, 20],
            ground: [70, 130, 60],
            sky: [150, 195, 240],
        }
    }
}

/// Serialized world description. Vertices of `centerline` form a closed
/// loop in driving order; the last vertex connects back to the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackDefinition {
    pub id: String,
    pub centerline: Vec<Vec2>,
    pub half_width: f64,
    pub boundary_kind: BoundaryKind,
    #[serde(default)]
    pub obstacles: Vec<Cone>,
    pub start_finish: Segment,
    #[serde(default)]
    pub palette: Palette,
    /// Generator seed for procedurally laid out tracks.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Nearest-centerline query result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Signed distance, positive to the left of the driving direction.
    pub offset: f64,
    /// Arc length of the nearest point.
    pub s: f64,
    pub point: Vec2,
    pub tangent: Vec2,
    pub segment: usize,
}

/// A stretch where the centerline bends noticeably after being straighter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureZone {
    pub s_entry: f64,
    pub s_exit: f64,
    /// +1 for a left-hand bend, -1 for right.
    pub direction: i8,
}

/// Grid of unsigned distances to the centerline, used to shade the floor.
#[derive(Clone, Debug)]
struct RoadMask {
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    dist: Vec<f32>,
}

/// Cells per meter of the floor mask. A power of two so that cell indices
/// of mirrored points are mirrored exactly.
const MASK_RES: f64 = 64.0;
const MASK_MARGIN: f64 = 0.3;

impl RoadMask {
    fn build(pts: &[Vec2], half_width: f64) -> RoadMask {
        let reach = half_width + MASK_MARGIN;
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in pts {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let i0 = ((lo.x - reach) * MASK_RES).floor() as i64 - 1;
        let j0 = ((lo.y - reach) * MASK_RES).floor() as i64 - 1;
        let nx = (((hi.x + reach) * MASK_RES).ceil() as i64 - i0 + 2) as usize;
        let ny = (((hi.y + reach) * MASK_RES).ceil() as i64 - j0 + 2) as usize;
        let mut dist = vec![f32::INFINITY; nx * ny];
        let n = pts.len();
        for k in 0..n {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let ci = |x: f64| ((x * MASK_RES).floor() as i64 - i0).clamp(0, nx as i64 - 1) as usize;
            let cj = |y: f64| ((y * MASK_RES).floor() as i64 - j0).clamp(0, ny as i64 - 1) as usize;
            for j in cj(a.y.min(b.y) - reach)..=cj(a.y.max(b.y) + reach) {
                for i in ci(a.x.min(b.x) - reach)..=ci(a.x.max(b.x) + reach) {
                    let p = Vec2::new(
                        ((i as i64 + i0) as f64 + 0.5) / MASK_RES,
                        ((j as i64 + j0) as f64 + 0.5) / MASK_RES,
                    );
                    let t = closest_on_segment(p, a, b);
                    let d = p.dist(a + (b - a) * t) as f32;
                    let cell = &mut dist[j * nx + i];
                    if d < *cell {
                        *cell = d;
                    }
                }
            }
        }
        RoadMask {
            i0,
            j0,
            nx,
            ny,
            dist,
        }
    }

    fn lookup(&self, p: Vec2) -> f32 {
        let i = (p.x * MASK_RES).floor() as i64 - self.i0;
        let j = (p.y * MASK_RES).floor() as i64 - self.j0;
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return f32::INFINITY;
        }
        self.dist[j as usize * self.nx + i as usize]
    }
}

/// Validated track with derived geometry.
#[derive(Clone, Debug)]
pub struct Track {
    def: TrackDefinition,
    cum: Vec<f64>,
    walls: Vec<Segment>,
    mask: RoadMask,
    start_s: f64,
    start_tangent: Vec2,
}

impl Track {
    pub fn new(def: TrackDefinition) -> Result<Track, SimError> {
        validate(&def)?;
        let pts = &def.centerline;
        let n = pts.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let l = pts[i].dist(pts[(i + 1) % n]);
            cum.push(cum[i] + l);
        }
        let walls = match def.boundary_kind {
            BoundaryKind::Walls => wall_segments(pts, def.half_width),
            BoundaryKind::Open => Vec::new(),
        };
        let mask = RoadMask::build(pts, def.half_width);
        let mut track = Track {
            def,
            cum,
            walls,
            mask,
            start_s: 0.0,
            start_tangent: Vec2::new(1.0, 0.0),
        };
        let (s, tangent) = track.start_crossing().expect("validated start line");
        track.start_s = s;
        track.start_tangent = tangent;
        Ok(track)
    }

    pub fn from_json(s: &str) -> Result<Track, SimError> {
        let def: TrackDefinition =
            serde_json::from_str(s).map_err(|e| SimError::Parse(e.to_string()))?;
        Track::new(def)
    }

    pub fn definition(&self) -> &TrackDefinition {
        &self.def
    }

    pub fn id(&self) -> &str {
        &self.def.id
    }

    pub fn half_width(&self) -> f64 {
        self.def.half_width
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        self.def.boundary_kind
    }

    pub fn palette(&self) -> &Palette {
        &self.def.palette
    }

    pub fn cones(&self) -> &[Cone] {
        &self.def.obstacles
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    /// Centerline length in meters.
    pub fn length(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    /// Driving direction at the start-finish line.
    pub fn start_tangent(&self) -> Vec2 {
        self.start_tangent
    }

    fn segment(&self, i: usize) -> (Vec2, Vec2) {
        let pts = &self.def.centerline;
        (pts[i], pts[(i + 1) % pts.len()])
    }

    fn start_crossing(&self) -> Option<(f64, Vec2)> {
        let sf = self.def.start_finish;
        (0..self.def.centerline.len()).find_map(|i| {
            let (a, b) = self.segment(i);
            let (t, _) = segment_intersection(a, b, sf.a, sf.b)?;
            (t < 1.0).then(|| (self.cum[i] + t * a.dist(b), (b - a).normalized()))
        })
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for i in 0..self.def.centerline.len() {
            let (a, b) = self.segment(i);
            let t = closest_on_segment(p, a, b);
            let q = a + (b - a) * t;
            let d = (p - q).dot(p - q);
            if d < best.0 {
                best = (d, i, t);
            }
        }
        let (d2, i, t) = best;
        let (a, b) = self.segment(i);
        let q = a + (b - a) * t;
        let tangent = (b - a).normalized();
        let side = tangent.cross(p - q);
        let dist = d2.sqrt();
        Projection {
            offset: if side < 0.0 { -dist } else { dist },
            s: self.cum[i] + t * a.dist(b),
            point: q,
            tangent,
            segment: i,
        }
    }

    pub fn lateral_offset_at(&self, p: Vec2) -> f64 {
        self.project(p).offset
    }

    pub fn off_track_at(&self, p: Vec2) -> bool {
        self.lateral_offset_at(p).abs() > self.def.half_width
    }

    /// Unsigned distance to the centerline from the floor mask.
    pub(crate) fn floor_distance(&self, p: Vec2) -> f32 {
        self.mask.lookup(p)
    }

    /// Point and unit tangent at arc length `s` (wrapped onto the loop).
    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        let len = self.length();
        let s = s.rem_euclid(len);
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.def.centerline.len() - 1),
            Err(i) => i - 1,
        };
        let (a, b) = self.segment(i);
        let l = a.dist(b);
        let t = if l > 0.0 { (s - self.cum[i]) / l } else { 0.0 };
        (a + (b - a) * t, (b - a).normalized())
    }

    /// Signed curvature (1/m, positive = left) at every vertex.
    pub fn vertex_curvature(&self) -> Vec<f64> {
        let pts = &self.def.centerline;
        let n = pts.len();
        (0..n)
            .map(|i| {
                let prev = pts[(i + n - 1) % n];
                let (cur, next) = (pts[i], pts[(i + 1) % n]);
                let (d0, d1) = (cur - prev, next - cur);
                let turn = d0.cross(d1).atan2(d0.dot(d1));
                turn / (0.5 * (d0.norm() + d1.norm()))
            })
            .collect()
    }

    /// Arc length of vertex `i`.
    pub fn vertex_s(&self, i: usize) -> f64 {
        self.cum[i]
    }

    /// Bends whose smoothed curvature rises above `enter` (1/m) after having
    /// been below `enter / 2`.
    pub fn curvature_zones(&self, enter: f64) -> Vec<CurvatureZone> {
        let k = self.vertex_curvature();
        let n = k.len();
        // average over roughly half a meter of centerline
        let spacing = self.length() / n as f64;
        let w = ((0.25 / spacing).round() as usize).max(1);
        let smooth: Vec<f64> = (0..n)
            .map(|i| {
                let s: f64 = (0..=2 * w).map(|d| k[(i + n + d - w) % n]).sum();
                s / (2 * w + 1) as f64
            })
            .collect();
        // start scanning from a straight-ish vertex so zones are not split
        let Some(origin) = (0..n).min_by(|&a, &b| smooth[a].abs().total_cmp(&smooth[b].abs())) else {
            return Vec::new();
        };
        if smooth[origin].abs() >= enter / 2.0 {
            return Vec::new();
        }
        let mut zones = Vec::new();
        let mut inside: Option<(f64, i8)> = None;
        let mut armed = true;
        let sign = |c: f64| if c > 0.0 { 1i8 } else { -1 };
        for step in 1..=n {
            let i = (origin + step) % n;
            let c = smooth[i];
            match inside {
                None if armed && c.abs() > enter => {
                    inside = Some((self.cum[i], sign(c)));
                    armed = false;
                }
                None => armed |= c.abs() < enter / 2.0,
                Some((s_entry, direction)) => {
                    let flipped = c.abs() > enter && sign(c) != direction;
                    if flipped || c.abs() < enter / 2.0 {
                        zones.push(CurvatureZone {
                            s_entry,
                            s_exit: self.cum[i],
                            direction,
                        });
                        inside = flipped.then(|| (self.cum[i], sign(c)));
                        armed = !flipped;
                    }
                }
            }
        }
        zones.sort_by(|a, b| a.s_entry.total_cmp(&b.s_entry));
        zones
    }

    /// Initial pose: on the centerline `ahead` meters past the start line,
    /// facing along the track.
    pub fn spawn_pose(&self, ahead: f64) -> (Vec2, f64) {
        let (p, t) = self.point_at(self.start_s + ahead);
        (p, t.y.atan2(t.x))
    }
}

fn wall_segments(pts: &[Vec2], hw: f64) -> Vec<Segment> {
    let n = pts.len();
    let offset = |i: usize, side: f64| {
        let t0 = (pts[i] - pts[(i + n - 1) % n]).normalized();
        let t1 = (pts[(i + 1) % n] - pts[i]).normalized();
        let normal = (t0.perp() + t1.perp()).normalized();
        let miter = normal.dot(t1.perp()).max(0.25);
        pts[i] + normal * (side * hw / miter)
    };
    let mut out = Vec::with_capacity(2 * n);
    for side in [1.0, -1.0] {
        let ring: Vec<Vec2> = (0..n).map(|i| offset(i, side)).collect();
        for i in 0..n {
            out.push(Segment {
                a: ring[i],
                b: ring[(i + 1) % n],
            });
        }
    }
    out
}

fn validate(def: &TrackDefinition) -> Result<(), SimError> {
    let bad = |m: String| Err(SimError::InvalidTrack(format!("{}: {m}", def.id)));
    let pts = &def.centerline;
    let n = pts.len();
    if n < 3 {
        return bad(format!("centerline needs at least 3 points, has {n}"));
    }
    if !(def.half_width.is_finite() && def.half_width > 0.0) {
        return bad(format!("half_width {} must be positive", def.half_width));
    }
    if pts.iter().any(|p| !p.is_finite()) {
        return bad("non-finite centerline point".into());
    }
    for i in 0..n {
        if pts[i] == pts[(i + 1) % n] {
            return bad(format!("repeated centerline point at {i}"));
        }
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segment_intersection(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]).is_some() {
                return bad(format!("centerline segments {i} and {j} intersect"));
            }
        }
    }
    let sf = def.start_finish;
    // sign changes of the side of the line, so a vertex lying on it is
    // counted exactly once
    let side = |p: Vec2| (sf.b - sf.a).cross(p - sf.a) < 0.0;
    let crossings = (0..n)
        .filter(|&i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            side(a) != side(b)
                && segment_intersection(a, b, sf.a, sf.b).is_some()
        })
        .count();
    if crossings != 1 {
        return bad(format!("start-finish line crosses the centerline {crossings} times"));
    }
    // a provisional track without the start line check, for offsets
    let probe = |p: Vec2| {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let t = closest_on_segment(p, a, b);
            let q = a + (b - a) * t;
            let d = p.dist(q);
            if d < best.0 {
                best = (d, (b - a).cross(p - q).signum());
            }
        }
        best
    };
    let (da, sa) = probe(sf.a);
    let (db, sb) = probe(sf.b);
    if da < def.half_width || db < def.half_width || sa == sb {
        return bad("start-finish line must span the whole drivable band".into());
    }
    for (k, c) in def.obstacles.iter().enumerate() {
        if !(c.radius > 0.0 && c.position.is_finite()) {
            return bad(format!("cone {k} is malformed"));
        }
        if def.boundary_kind == BoundaryKind::Open && probe(c.position).0 - c.radius <= def.half_width {
            return bad(format!("cone {k} intrudes into the drivable band"));
        }
    }
    Ok(())
}

const OVAL: &str = include_str!("../tracks/oval.json");
const MINI_MONACO: &str = include_str!("../tracks/mini_monaco_2d.json");
const GENERATED: &str = include_str!("../tracks/generated_track_2d.json");

pub const BUILTIN_TRACKS: [&str; 3] = ["oval", "mini_monaco_2d", "generated_track_2d"];

/// The shipped track definitions.
pub fn builtin_tracks() -> Vec<TrackDefinition> {
    [OVAL, MINI_MONACO, GENERATED]
        .iter()
        .map(|s| serde_json::from_str(s).expect("shipped track parses"))
        .collect()
}

pub fn builtin_track(id: &str) -> Result<Track, SimError> {
    let def = builtin_tracks()
        .into_iter()
        .find(|d| d.id == id)
        .ok_or_else(|| SimError::UnknownTrack(id.to_string()))?;
    Track::new(def)
}
