use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use macpilot_core::zoo::decode_checkpoint;
use macpilot_core::ControlCommand;
use macpilot_dataset::{open_recording, DatasetManifest, RecordingOptions, RecordingSession};
use macpilot_eval::{ModelPolicy, Policy};
use macpilot_sim::{CameraConfig, Frame, Simulator, Track};
use serde_json::json;

use crate::protocol::{ClientMessage, Mode, Pose, ServerMessage, StateMessage};
use crate::GatewayError;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub track: Arc<Track>,
    pub camera: CameraConfig,
    pub seed: u64,
    /// Recordings and checkpoints are resolved below this directory.
    pub data_root: PathBuf,
    /// Ticks without a control message after which throttle drops to zero.
    pub dead_man_ticks: u64,
}

impl SessionConfig {
    pub fn new(track: Arc<Track>, data_root: impl Into<PathBuf>) -> SessionConfig {
        SessionConfig {
            track,
            camera: CameraConfig::default(),
            seed: 0,
            data_root: data_root.into(),
            // half a second at 20 Hz
            dead_man_ticks: 10,
        }
    }
}

/// Everything one tick produced.
#[derive(Clone, Debug)]
pub struct TickOutput {
    pub seq: u64,
    /// The image the applied command was chosen on.
    pub frame: Frame,
    pub state: StateMessage,
}

struct Recording {
    session: RecordingSession,
    first_seq: u64,
}

/// The authoritative session: simulator, mode, command mailbox, recording
/// and autopilot. Network code feeds it messages and calls [`tick`] at the
/// fixed rate; nothing in here waits on I/O other than dataset writes.
///
/// [`tick`]: SessionCore::tick
pub struct SessionCore {
    cfg: SessionConfig,
    session_id: String,
    sim: Simulator,
    mode: Mode,
    seq: u64,
    clients: usize,
    /// Latest teleop command and the tick it arrived before.
    held: ControlCommand,
    held_since: u64,
    applied: ControlCommand,
    recording: Option<Recording>,
    autopilot: Option<ModelPolicy>,
    checkpoint: Option<PathBuf>,
    lap_start: Option<f64>,
    last_lap_time: Option<f64>,
    last: Option<macpilot_sim::TickEvents>,
}

impl SessionCore {
    pub fn new(cfg: SessionConfig) -> Result<SessionCore, GatewayError> {
        let sim = Simulator::new(cfg.track.clone(), cfg.camera, cfg.seed)?;
        Ok(SessionCore {
            session_id: format!("{}-{:016x}", cfg.track.id(), cfg.seed),
            cfg,
            sim,
            mode: Mode::Idle,
            seq: 0,
            clients: 0,
            held: ControlCommand::IDLE,
            held_since: 0,
            applied: ControlCommand::IDLE,
            recording: None,
            autopilot: None,
            checkpoint: None,
            lap_start: None,
            last_lap_time: None,
            last: None,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn checkpoint(&self) -> Option<&Path> {
        self.checkpoint.as_deref()
    }

    pub fn client_connected(&mut self) {
        self.clients += 1;
    }

    pub fn client_disconnected(&mut self) {
        self.clients = self.clients.saturating_sub(1);
    }

    /// Idle with nobody watching: the car is not stepped at all.
    pub fn paused(&self) -> bool {
        self.mode == Mode::Idle && self.clients == 0
    }

    pub fn hello(&self, tick_rate: f64) -> ServerMessage {
        ServerMessage::Hello {
            protocol: crate::protocol::PROTOCOL_VERSION,
            session_id: self.session_id.clone(),
            track_id: self.cfg.track.id().to_string(),
            tick_rate,
            width: self.cfg.camera.width,
            height: self.cfg.camera.height,
            mode: self.mode,
        }
    }

    /// Parses and handles one text message.
    pub fn handle_text(&mut self, text: &str) -> ServerMessage {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => ServerMessage::Nack {
                seq: None,
                request: None,
                reason: format!("malformed message: {e}"),
            },
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> ServerMessage {
        let seq = msg.seq();
        let kind = msg.kind();
        let nack = |reason: String| ServerMessage::Nack {
            seq,
            request: Some(kind.to_string()),
            reason,
        };
        let ack = |clamped: Option<bool>, detail: Option<serde_json::Value>| ServerMessage::Ack {
            seq,
            request: kind.to_string(),
            clamped,
            detail,
        };
        match msg {
            ClientMessage::Control {
                steering, throttle, ..
            } => match self.mode {
                Mode::Teleop | Mode::Recording => {
                    let (cmd, clamped) = ControlCommand::clamped(steering, throttle);
                    self.held = cmd;
                    self.held_since = self.seq;
                    ack(Some(clamped), Some(json!({"steering": cmd.steering, "throttle": cmd.throttle})))
                }
                Mode::Autopilot => nack("control ignored in autopilot mode".into()),
                Mode::Idle => nack("control ignored in idle mode".into()),
            },
            ClientMessage::SetMode { mode, .. } => {
                if self.mode == Mode::Recording {
                    return nack("stop recording first".into());
                }
                match mode {
                    Mode::Recording => nack("use start_recording to record".into()),
                    Mode::Autopilot if self.autopilot.is_none() => nack("no checkpoint loaded".into()),
                    _ => {
                        if mode != self.mode {
                            self.held = ControlCommand::IDLE;
                            self.held_since = self.seq;
                            if let Some(p) = self.autopilot.as_mut() {
                                p.reset();
                            }
                        }
                        self.mode = mode;
                        ack(None, None)
                    }
                }
            }
            ClientMessage::StartRecording { out_path, .. } => {
                match self.mode {
                    Mode::Recording => return nack("already recording".into()),
                    Mode::Autopilot => return nack("switch to teleop before recording".into()),
                    Mode::Idle | Mode::Teleop => {}
                }
                let out = match self.resolve(&out_path) {
                    Ok(p) => p,
                    Err(e) => return nack(e),
                };
                let mut opts = RecordingOptions::new(self.cfg.track.id(), self.cfg.camera);
                opts.seed = Some(self.cfg.seed);
                opts.metadata = json!({"source": "teleop", "session_id": self.session_id});
                match open_recording(opts, &out) {
                    Ok(session) => {
                        if self.mode != Mode::Teleop {
                            self.held = ControlCommand::IDLE;
                            self.held_since = self.seq;
                        }
                        self.recording = Some(Recording {
                            session,
                            first_seq: self.seq + 1,
                        });
                        self.mode = Mode::Recording;
                        ack(None, Some(json!({"out_path": out})))
                    }
                    Err(e) => nack(e.to_string()),
                }
            }
            ClientMessage::StopRecording { .. } => match self.finish_recording() {
                Ok(Some((m, first, last))) => ack(
                    None,
                    Some(json!({
                        "samples": m.sample_count,
                        "episodes": m.episodes.len(),
                        "first_seq": first,
                        "last_seq": last,
                    })),
                ),
                Ok(None) => nack("not recording".into()),
                Err(e) => nack(e.to_string()),
            },
            ClientMessage::LoadCheckpoint { path, .. } => {
                let path = match self.resolve(&path) {
                    Ok(p) => p,
                    Err(e) => return nack(e),
                };
                let loaded = std::fs::read(&path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))
                    .and_then(|b| decode_checkpoint(&b).map_err(|e| e.to_string()))
                    .and_then(|(m, _)| ModelPolicy::new(m, &self.cfg.camera).map_err(|e| e.to_string()));
                match loaded {
                    Ok(policy) => {
                        let name = policy.model().config().name.clone();
                        self.autopilot = Some(policy);
                        self.checkpoint = Some(path);
                        ack(None, Some(json!({"architecture": name})))
                    }
                    Err(e) => nack(e),
                }
            }
            ClientMessage::Reset { .. } => {
                if self.mode == Mode::Recording {
                    return nack("stop recording first".into());
                }
                match Simulator::new(self.cfg.track.clone(), self.cfg.camera, self.cfg.seed) {
                    Ok(sim) => {
                        self.sim = sim;
                        self.lap_start = None;
                        self.last_lap_time = None;
                        self.last = None;
                        self.held = ControlCommand::IDLE;
                        if let Some(p) = self.autopilot.as_mut() {
                            p.reset();
                        }
                        ack(None, None)
                    }
                    Err(e) => nack(e.to_string()),
                }
            }
        }
    }

    /// A relative path without `..`, below the data root.
    fn resolve(&self, p: &str) -> Result<PathBuf, String> {
        let rel = Path::new(p);
        let ok = !p.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !ok {
            return Err(format!("path {p:?} must be relative to the data directory and must not contain '..'"));
        }
        Ok(self.cfg.data_root.join(rel))
    }

    fn finish_recording(&mut self) -> Result<Option<(DatasetManifest, u64, u64)>, GatewayError> {
        let Some(rec) = self.recording.take() else {
            return Ok(None);
        };
        self.mode = Mode::Teleop;
        let mut session = rec.session;
        session.end_episode()?;
        let m = session.finalize()?;
        Ok(Some((m, rec.first_seq, self.seq)))
    }

    /// Finalizes an open recording; call before dropping the session.
    pub fn shutdown(&mut self) -> Result<Option<DatasetManifest>, GatewayError> {
        Ok(self.finish_recording()?.map(|(m, _, _)| m))
    }

    fn command(&mut self, frame: &Frame) -> ControlCommand {
        match self.mode {
            Mode::Idle => ControlCommand::IDLE,
            Mode::Teleop | Mode::Recording => {
                if self.seq - self.held_since >= self.cfg.dead_man_ticks {
                    self.held.throttle = 0.0;
                }
                self.held
            }
            Mode::Autopilot => {
                let state = *self.sim.state();
                let track = self.cfg.track.clone();
                self.autopilot
                    .as_mut()
                    .expect("autopilot mode needs a policy")
                    .act(Some(frame), &state, &track)
            }
        }
    }

    /// Advances one step unless paused. In recording mode the frame and the
    /// command applied on it are stored first, so every tick is one sample.
    pub fn tick(&mut self) -> Result<Option<TickOutput>, GatewayError> {
        if self.paused() {
            return Ok(None);
        }
        let frame = self.sim.render();
        let cmd = self.command(&frame);
        if let Some(rec) = self.recording.as_mut() {
            if let Err(e) = rec.session.append(&frame, cmd) {
                // keep what was recorded so far
                log::error!("recording failed: {e}");
                self.finish_recording()?;
                return Err(e.into());
            }
        }
        let ev = self.sim.tick(cmd);
        self.applied = cmd;
        self.seq += 1;
        if ev.lap_crossing {
            let now = self.sim.state().sim_time;
            if let Some(t0) = self.lap_start {
                self.last_lap_time = Some(now - t0);
            }
            self.lap_start = Some(now);
        }
        self.last = Some(ev);
        Ok(Some(TickOutput {
            seq: self.seq,
            frame,
            state: self.state_message(),
        }))
    }

    pub fn state_message(&self) -> StateMessage {
        let s = self.sim.state();
        let (offset, off, wall) = match self.last {
            Some(ev) => (ev.lateral_offset, ev.off_track, ev.wall_contact),
            None => {
                let o = self.cfg.track.lateral_offset_at(s.position);
                (o, o.abs() > self.cfg.track.half_width(), false)
            }
        };
        StateMessage {
            seq: self.seq,
            mode: self.mode,
            tick: self.sim.ticks(),
            sim_time: s.sim_time,
            pose: Pose {
                x: s.position.x,
                y: s.position.y,
                heading: s.heading,
            },
            speed: s.speed,
            steering: self.applied.steering,
            throttle: self.applied.throttle,
            laps: self.sim.laps().crossings,
            last_lap_time: self.last_lap_time,
            lateral_offset: offset,
            off_track: off,
            wall_contact: wall,
            recording_samples: self.recording.as_ref().map(|r| r.session.sample_count()),
            clients: self.clients,
        }
    }
}
