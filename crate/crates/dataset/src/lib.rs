//! Demonstration datasets: a crash-tolerant recorder, the on-disk format,
//! per-episode splits and sliding windows.
//!
//! Layout of a dataset directory:
//!
//! - `manifest.json`: [`DatasetManifest`]
//! - `samples.jsonl`: one [`Sample`] per line
//! - `frames.bin`: per frame, rgb bytes then depth as f32 little-endian
//! - `frames.idx`: 16 bytes per frame, u64 offset, u32 crc32, u32 zero

pub mod format;
pub mod inspect;
pub mod record;
pub mod split;
pub mod store;
pub mod transform;

pub use format::{ChannelSpec, DatasetManifest, EpisodeInfo, Sample, FORMAT_VERSION};
pub use inspect::{inspect, Histogram, InspectReport};
pub use record::{open_recording, recover, RecordingOptions, RecordingSession};
pub use split::{make_windows, split, View, Window, Windows};
pub use store::Dataset;
pub use transform::{area_resize, frame_to_input, InputSpec};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("{0}")]
    Contract(String),
    #[error("checksum mismatch in {0}")]
    Checksum(String),
}
