use macpilot_sim::CameraConfig;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const CAPTURE_FPS: u32 = 20;
pub const MANIFEST: &str = "manifest.json";
pub const SAMPLES: &str = "samples.jsonl";
pub const FRAMES: &str = "frames.bin";
pub const INDEX: &str = "frames.idx";
/// Episode journal, only present while recording.
pub const JOURNAL: &str = "episodes.jsonl";
pub const INDEX_ENTRY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub frame_ref: u64,
    pub steering: f32,
    pub throttle: f32,
    pub timestamp: f64,
    pub episode_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub id: u32,
    /// Index of the first sample.
    pub start: u64,
    pub len: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub rgb: u32,
    pub depth: u32,
}

impl ChannelSpec {
    pub const RGBD: ChannelSpec = ChannelSpec { rgb: 3, depth: 1 };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub track_id: String,
    pub capture_fps: u32,
    /// Width, height.
    pub resolution: [u32; 2],
    pub channels: ChannelSpec,
    pub camera: CameraConfig,
    pub sample_count: u64,
    pub episodes: Vec<EpisodeInfo>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub frames_crc32: u32,
    pub samples_crc32: u32,
}

impl DatasetManifest {
    pub fn frame_bytes(&self) -> usize {
        frame_bytes(self.resolution[0], self.resolution[1])
    }
}

pub fn frame_bytes(w: u32, h: u32) -> usize {
    w as usize * h as usize * 7
}

pub fn encode_frame(rgb: &[u8], depth: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(rgb.len() + depth.len() * 4);
    out.extend_from_slice(rgb);
    for d in depth {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

pub fn index_entry(offset: u64, crc: u32) -> [u8; INDEX_ENTRY] {
    let mut e = [0u8; INDEX_ENTRY];
    e[..8].copy_from_slice(&offset.to_le_bytes());
    e[8..12].copy_from_slice(&crc.to_le_bytes());
    e
}

pub fn parse_index_entry(e: &[u8]) -> (u64, u32) {
    (
        u64::from_le_bytes(e[..8].try_into().unwrap()),
        u32::from_le_bytes(e[8..12].try_into().unwrap()),
    )
}
