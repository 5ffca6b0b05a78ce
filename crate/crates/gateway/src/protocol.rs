//! Messages on the wire. Text messages are JSON objects tagged by `type`;
//! camera frames travel as binary messages.

use serde::{Deserialize, Serialize};

use macpilot_sim::Frame;

use crate::GatewayError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const FRAME_HEADER_LEN: usize = 8;
/// Ends a binary frame message that carries a depth preview.
pub const DEPTH_TRAILER: &[u8; 4] = b"DPT8";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Teleop,
    Recording,
    Autopilot,
}

/// Client to server. `seq` is the client's own counter, echoed in the reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetMode {
        #[serde(default)]
        seq: Option<u64>,
        mode: Mode,
    },
    Control {
        #[serde(default)]
        seq: Option<u64>,
        steering: f32,
        throttle: f32,
    },
    StartRecording {
        #[serde(default)]
        seq: Option<u64>,
        out_path: String,
    },
    StopRecording {
        #[serde(default)]
        seq: Option<u64>,
    },
    LoadCheckpoint {
        #[serde(default)]
        seq: Option<u64>,
        path: String,
    },
    Reset {
        #[serde(default)]
        seq: Option<u64>,
    },
}

impl ClientMessage {
    pub fn seq(&self) -> Option<u64> {
        match self {
            ClientMessage::SetMode { seq, .. }
            | ClientMessage::Control { seq, .. }
            | ClientMessage::StartRecording { seq, .. }
            | ClientMessage::StopRecording { seq }
            | ClientMessage::LoadCheckpoint { seq, .. }
            | ClientMessage::Reset { seq } => *seq,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::SetMode { .. } => "set_mode",
            ClientMessage::Control { .. } => "control",
            ClientMessage::StartRecording { .. } => "start_recording",
            ClientMessage::StopRecording { .. } => "stop_recording",
            ClientMessage::LoadCheckpoint { .. } => "load_checkpoint",
            ClientMessage::Reset { .. } => "reset",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Per-tick telemetry. `seq` matches the binary frame of the same tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub seq: u64,
    pub mode: Mode,
    /// Simulator ticks since the last reset.
    pub tick: u64,
    pub sim_time: f64,
    pub pose: Pose,
    pub speed: f64,
    pub steering: f32,
    pub throttle: f32,
    pub laps: u32,
    pub last_lap_time: Option<f64>,
    pub lateral_offset: f64,
    pub off_track: bool,
    pub wall_contact: bool,
    pub recording_samples: Option<u64>,
    pub clients: usize,
}

/// Server to client, text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        session_id: String,
        track_id: String,
        tick_rate: f64,
        width: u32,
        height: u32,
        mode: Mode,
    },
    Ack {
        seq: Option<u64>,
        request: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clamped: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<serde_json::Value>,
    },
    Nack {
        seq: Option<u64>,
        request: Option<String>,
        reason: String,
    },
    State(StateMessage),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Decoded binary frame message.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMessage {
    pub seq: u32,
    pub width: u16,
    pub height: u16,
    pub jpeg: Vec<u8>,
    /// `width * height` bytes, `255 * depth / far_clip`.
    pub depth: Option<Vec<u8>>,
}

pub fn quantize_depth(depth: &[f32], far_clip: f32) -> Vec<u8> {
    depth
        .iter()
        .map(|&d| ((d / far_clip).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Header (seq u32, width u16, height u16, little endian), JPEG of the rgb
/// image, then optionally the depth preview followed by [`DEPTH_TRAILER`].
pub fn encode_frame_message(
    seq: u64,
    frame: &Frame,
    far_clip: f32,
    with_depth: bool,
    quality: u8,
) -> Result<Vec<u8>, GatewayError> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + frame.pixels() * 2);
    out.extend_from_slice(&(seq as u32).to_le_bytes());
    out.extend_from_slice(&(frame.width as u16).to_le_bytes());
    out.extend_from_slice(&(frame.height as u16).to_le_bytes());
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality)
        .encode(&frame.rgb, frame.width, frame.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| GatewayError::Encode(e.to_string()))?;
    if with_depth {
        out.extend(quantize_depth(&frame.depth, far_clip));
        out.extend_from_slice(DEPTH_TRAILER);
    }
    Ok(out)
}

pub fn decode_frame_message(bytes: &[u8]) -> Result<FrameMessage, GatewayError> {
    let bad = |m: &str| GatewayError::Protocol(format!("frame message: {m}"));
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(bad("shorter than its header"));
    }
    let seq = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let width = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    let height = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
    let body = &bytes[FRAME_HEADER_LEN..];
    let px = width as usize * height as usize;
    let (jpeg, depth) = if body.ends_with(DEPTH_TRAILER) {
        let end = body.len() - DEPTH_TRAILER.len();
        let start = end.checked_sub(px).ok_or_else(|| bad("depth block truncated"))?;
        (&body[..start], Some(body[start..end].to_vec()))
    } else {
        (body, None)
    };
    if !(jpeg.starts_with(&[0xFF, 0xD8]) && jpeg.ends_with(&[0xFF, 0xD9])) {
        return Err(bad("payload is not a JPEG image"));
    }
    Ok(FrameMessage {
        seq,
        width,
        height,
        jpeg: jpeg.to_vec(),
        depth,
    })
}
