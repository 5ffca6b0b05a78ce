use crate::geometry::segment_intersection;
use crate::track::Track;
use crate::vehicle::VehicleState;

/// Fraction of the track length that must be driven between two counted
/// crossings.
pub const GUARD_FRACTION: f64 = 0.5;

/// Whether `prev -> next` passes over the start-finish line in the driving
/// direction.
pub fn crosses_start_line(prev: &VehicleState, next: &VehicleState, track: &Track) -> bool {
    let sf = track.definition().start_finish;
    let motion = next.position - prev.position;
    if motion.dot(track.start_tangent()) <= 0.0 {
        return false;
    }
    // count a touch of the line only once: the end point may sit on it,
    // the start point may not
    match segment_intersection(prev.position, next.position, sf.a, sf.b) {
        Some((t, _)) => t > 0.0,
        None => false,
    }
}

/// Forward crossing that also satisfies the distance guard relative to the
/// odometer reading of the last counted crossing.
pub fn detect_lap_crossing(
    prev: &VehicleState,
    next: &VehicleState,
    track: &Track,
    last_crossing_odometer: f64,
) -> bool {
    next.odometer - last_crossing_odometer >= GUARD_FRACTION * track.length()
        && crosses_start_line(prev, next, track)
}

/// Counts guarded start-line crossings along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LapCounter {
    pub last_crossing_odometer: f64,
    pub crossings: u32,
    /// Simulation time of the most recent counted crossing.
    pub last_crossing_time: Option<f64>,
}

impl LapCounter {
    pub fn new(start_odometer: f64) -> LapCounter {
        LapCounter {
            last_crossing_odometer: start_odometer,
            crossings: 0,
            last_crossing_time: None,
        }
    }

    pub fn update(&mut self, prev: &VehicleState, next: &VehicleState, track: &Track) -> bool {
        let hit = detect_lap_crossing(prev, next, track, self.last_crossing_odometer);
        if hit {
            self.last_crossing_odometer = next.odometer;
            self.crossings += 1;
            self.last_crossing_time = Some(next.sim_time);
        }
        hit
    }
}
