use std::path::Path;
use std::sync::Arc;

use macpilot_core::ControlCommand;
use macpilot_dataset::{open_recording, DatasetManifest, RecordingOptions};
use macpilot_sim::{CameraConfig, Simulator, Track};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::policy::{OraclePolicy, Policy};
use crate::EvalError;

/// Scripted demonstrations: the oracle drives, its clean command is the
/// label, and a correlated steering disturbance is added to what the car
/// actually receives so that the data also shows recoveries.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoOptions {
    /// Timed laps to record after the run-in from the spawn point.
    pub laps: usize,
    pub seed: u64,
    /// Standard deviation of the steering disturbance.
    pub noise: f32,
    /// Tick-to-tick correlation of the disturbance.
    pub noise_correlation: f32,
    pub camera: CameraConfig,
    pub oracle: OraclePolicy,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            laps: 3,
            seed: 0,
            noise: 0.15,
            noise_correlation: 0.95,
            camera: CameraConfig::default(),
            oracle: OraclePolicy::default(),
        }
    }
}

/// Records one episode per lap (the run-in joins the first) into `out`.
pub fn record_demonstration(
    track: Arc<Track>,
    opts: &DemoOptions,
    out: &Path,
) -> Result<DatasetManifest, EvalError> {
    if opts.laps == 0 {
        return Err(EvalError::Config("laps must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&opts.noise_correlation) || !(opts.noise >= 0.0) {
        return Err(EvalError::Config("noise must be >= 0 with correlation in [0, 1)".into()));
    }
    let mut rec_opts = RecordingOptions::new(track.id(), opts.camera);
    rec_opts.seed = Some(opts.seed);
    rec_opts.metadata = json!({
        "source": "oracle",
        "noise": opts.noise,
        "noise_correlation": opts.noise_correlation,
        "throttle": opts.oracle.throttle,
    });
    let mut session = open_recording(rec_opts, out)?;
    let mut sim = Simulator::new(track.clone(), opts.camera, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6465_6d6f);
    let mut oracle = opts.oracle.clone();
    let rho = opts.noise_correlation;
    // uniform innovations with the variance that keeps the AR(1) process at
    // the requested spread
    let b = opts.noise * (3.0 * (1.0 - rho * rho)).sqrt();
    let mut disturbance = 0.0f32;
    let mut crossings = 0;
    // a lap takes a few hundred ticks; this only stops runaway loops
    let budget = (40.0 * (opts.laps + 1) as f64 * track.length() / macpilot_sim::DT) as u64;
    while crossings <= opts.laps {
        if sim.ticks() > budget {
            return Err(EvalError::Config(format!(
                "demonstration on {} did not finish its laps",
                track.id()
            )));
        }
        let frame = sim.render();
        let clean = oracle.act(None, sim.state(), &track);
        session.append(&frame, clean)?;
        if b > 0.0 {
            disturbance = rho * disturbance + rng.gen_range(-b..=b);
        }
        let applied = ControlCommand::new((clean.steering + disturbance).clamp(-1.0, 1.0), clean.throttle);
        if sim.tick(applied).lap_crossing {
            crossings += 1;
            if crossings >= 2 {
                session.end_episode()?;
            }
        }
    }
    session.end_episode()?;
    Ok(session.finalize()?)
}
