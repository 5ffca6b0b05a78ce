use std::path::Path;
use std::sync::Arc;

use macpilot_core::zoo::decode_checkpoint;
use macpilot_sim::{CameraConfig, CurvatureZone, Simulator, Track};
use serde::{Deserialize, Serialize};

use crate::metrics::{EdgeDetector, TrajectorySample};
use crate::policy::{ModelPolicy, OraclePolicy, Policy};
use crate::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    OffTrack,
    WallContact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationEvent {
    pub sim_time: f64,
    pub lateral_offset: f64,
    pub kind: DeviationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnfReason {
    Crash,
    Timeout,
}

/// Outcome of one autonomous run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapReport {
    pub model_id: String,
    pub track_id: String,
    pub seed: u64,
    pub attempted_laps: usize,
    /// Seconds per completed lap, start line to start line.
    pub lap_times: Vec<f64>,
    pub deviations: Vec<DeviationEvent>,
    /// Seconds from entering a bend to steering into it.
    pub response_speed: Vec<f64>,
    /// Bends left without a steering response.
    pub response_missed: usize,
    pub dnf_reason: Option<DnfReason>,
    pub sim_time: f64,
}

impl LapReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<LapReport, EvalError> {
        serde_json::from_str(s).map_err(|e| EvalError::Config(format!("bad lap report: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub camera: CameraConfig,
    /// Seconds allowed per lap. `None` means five oracle laps.
    pub lap_timeout: Option<f64>,
    /// Continuous wall contact longer than this ends the run as a crash.
    pub stall_seconds: f64,
    /// Curvature (1/m) that marks a bend for the response metric.
    pub response_curvature: f64,
    /// Steering change that counts as reacting to a bend.
    pub response_delta: f32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            camera: CameraConfig::default(),
            lap_timeout: None,
            stall_seconds: 5.0,
            response_curvature: 0.4,
            response_delta: 0.2,
        }
    }
}

pub const LAP_TIMEOUT_FACTOR: f64 = 5.0;

/// Lap time of the default [`OraclePolicy`] on `track`.
pub fn oracle_lap_time(track: &Arc<Track>) -> Result<f64, EvalError> {
    let opts = EvalOptions {
        lap_timeout: Some(track.length() * 10.0),
        ..EvalOptions::default()
    };
    let r = run_laps(&mut OraclePolicy::default(), "oracle", track.clone(), 1, 0, &opts)?;
    r.lap_times
        .first()
        .copied()
        .ok_or_else(|| EvalError::Config(format!("the oracle cannot lap {}", track.id())))
}

struct Pending {
    zone: usize,
    entered: f64,
    reference: f32,
}

/// Whether going from `a` to `b` (a short forward step) passes arc length `s`
/// on a loop of length `len`.
fn passes(a: f64, b: f64, s: f64, len: f64) -> bool {
    let step = (b - a).rem_euclid(len);
    if step > len / 2.0 {
        return false;
    }
    let d = (s - a).rem_euclid(len);
    d > 0.0 && d <= step
}

/// Drives `policy` until `n_laps` laps are timed, the car is held by a wall
/// for too long, or a lap takes too long. The stretch from the spawn point
/// to the first start line crossing is not timed.
pub fn run_laps(
    policy: &mut dyn Policy,
    model_id: &str,
    track: Arc<Track>,
    n_laps: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<LapReport, EvalError> {
    if n_laps == 0 {
        return Err(EvalError::Config("n_laps must be at least 1".into()));
    }
    let timeout = match opts.lap_timeout {
        Some(t) => t,
        None => LAP_TIMEOUT_FACTOR * oracle_lap_time(&track)?,
    };
    let mut sim = Simulator::new(track.clone(), opts.camera, seed)?;
    let zones: Vec<CurvatureZone> = track.curvature_zones(opts.response_curvature);
    let len = track.length();
    let stall_ticks = (opts.stall_seconds / macpilot_sim::DT).round() as u64;

    policy.reset();
    let mut report = LapReport {
        model_id: model_id.to_string(),
        track_id: track.id().to_string(),
        seed,
        attempted_laps: n_laps,
        lap_times: Vec::new(),
        deviations: Vec::new(),
        response_speed: Vec::new(),
        response_missed: 0,
        dnf_reason: None,
        sim_time: 0.0,
    };
    let mut edges = EdgeDetector::default();
    let mut segment_start = 0.0;
    let mut timing = false;
    let mut in_wall = 0u64;
    let mut pending: Option<Pending> = None;
    let mut s_prev = track.project(sim.state().position).s;

    loop {
        let state = *sim.state();
        let frame = policy.needs_frame().then(|| sim.render());
        let cmd = policy.act(frame.as_ref(), &state, &track);
        if let Some(p) = &pending {
            let toward = -(zones[p.zone].direction as f32);
            let moved = toward * (cmd.steering - p.reference);
            if moved >= opts.response_delta || toward * cmd.steering >= opts.response_delta {
                report.response_speed.push(state.sim_time - p.entered);
                pending = None;
            }
        }

        let ev = sim.tick(cmd);
        let state = *sim.state();
        let now = state.sim_time;
        let sample = TrajectorySample {
            time: now,
            lateral_offset: ev.lateral_offset,
            wall_contact: ev.wall_contact,
        };
        report.deviations.extend(edges.push(&sample, track.half_width()));

        let s = track.project(state.position).s;
        if let Some(p) = &pending {
            if passes(s_prev, s, zones[p.zone].s_exit, len) {
                report.response_missed += 1;
                pending = None;
            }
        }
        if pending.is_none() {
            if let Some(z) = zones.iter().position(|z| passes(s_prev, s, z.s_entry, len)) {
                pending = Some(Pending {
                    zone: z,
                    entered: now,
                    reference: cmd.steering,
                });
            }
        }
        s_prev = s;

        if ev.lap_crossing {
            if timing {
                report.lap_times.push(now - segment_start);
            }
            timing = true;
            segment_start = now;
            if report.lap_times.len() == n_laps {
                break;
            }
        }
        in_wall = if ev.wall_contact { in_wall + 1 } else { 0 };
        if in_wall > stall_ticks {
            report.dnf_reason = Some(DnfReason::Crash);
            break;
        }
        if now - segment_start > timeout {
            report.dnf_reason = Some(DnfReason::Timeout);
            break;
        }
    }
    report.sim_time = sim.state().sim_time;
    Ok(report)
}

/// Loads a checkpoint read-only and runs it on `track`.
pub fn evaluate_checkpoint(
    path: &Path,
    track: Arc<Track>,
    n_laps: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<LapReport, EvalError> {
    let bytes = std::fs::read(path)?;
    let (model, _) = decode_checkpoint(&bytes)?;
    let id = model.config().name.clone();
    let mut policy = ModelPolicy::new(model, &opts.camera)?;
    run_laps(&mut policy, &id, track, n_laps, seed, opts)
}
