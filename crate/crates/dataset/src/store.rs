use std::fs::{self, File};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use macpilot_sim::Frame;

use crate::format::*;
use crate::split::{split, View};
use crate::DatasetError;

/// A finalized dataset. Frames are read on demand, so any number of readers
/// may share one instance.
#[derive(Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
    samples: Vec<Sample>,
    index: Vec<(u64, u32)>,
    frames: File,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset, DatasetError> {
        let manifest: DatasetManifest = serde_json::from_slice(&fs::read(root.join(MANIFEST))?)
            .map_err(|e| DatasetError::Format(format!("manifest.json: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(DatasetError::Format(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let samples_raw = fs::read(root.join(SAMPLES))?;
        if crc32fast::hash(&samples_raw) != manifest.samples_crc32 {
            return Err(DatasetError::Checksum(SAMPLES.into()));
        }
        let samples = samples_raw
            .split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_slice::<Sample>(l)
                    .map_err(|e| DatasetError::Format(format!("samples.jsonl line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let idx_raw = fs::read(root.join(INDEX))?;
        if idx_raw.len() % INDEX_ENTRY != 0 {
            return Err(DatasetError::Format("frames.idx has a partial entry".into()));
        }
        let index: Vec<(u64, u32)> = idx_raw.chunks(INDEX_ENTRY).map(parse_index_entry).collect();
        let frames = File::open(root.join(FRAMES))?;
        let ds = Dataset {
            root: root.to_path_buf(),
            manifest,
            samples,
            index,
            frames,
        };
        ds.check_structure()?;
        Ok(ds)
    }

    fn check_structure(&self) -> Result<(), DatasetError> {
        let m = &self.manifest;
        let bad = |s: String| Err(DatasetError::Format(s));
        if m.channels != ChannelSpec::RGBD {
            return bad(format!("unsupported channels {:?}", m.channels));
        }
        if [m.camera.width, m.camera.height] != m.resolution {
            return bad("camera and resolution disagree".into());
        }
        let total: u64 = m.episodes.iter().map(|e| e.len).sum();
        if total != m.sample_count || self.samples.len() as u64 != m.sample_count {
            return bad(format!(
                "sample count {} but episodes hold {total} and samples.jsonl has {}",
                m.sample_count,
                self.samples.len()
            ));
        }
        let mut next = 0u64;
        for (k, e) in m.episodes.iter().enumerate() {
            if e.id as usize != k || e.start != next {
                return bad(format!("episode {k} is out of order"));
            }
            next += e.len;
            let range = &self.samples[e.start as usize..(e.start + e.len) as usize];
            if range.iter().any(|s| s.episode_id != e.id) {
                return bad(format!("episode {k} contains foreign samples"));
            }
            if range.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
                return bad(format!("timestamps in episode {k} do not increase"));
            }
        }
        let fb = m.frame_bytes() as u64;
        let len = self.frames.metadata()?.len();
        if len != self.index.len() as u64 * fb {
            return bad(format!("frames.bin holds {len} bytes for {} frames", self.index.len()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            match self.index.get(s.frame_ref as usize) {
                Some(&(off, _)) if off == s.frame_ref * fb => {}
                _ => return bad(format!("sample {i} references a missing frame")),
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Frame of sample `i`, checked against its stored checksum.
    pub fn frame(&self, i: usize) -> Result<Frame, DatasetError> {
        let s = self
            .samples
            .get(i)
            .ok_or_else(|| DatasetError::Contract(format!("sample {i} out of range")))?;
        let (offset, crc) = self.index[s.frame_ref as usize];
        let mut buf = vec![0u8; self.manifest.frame_bytes()];
        self.frames.read_exact_at(&mut buf, offset)?;
        if crc32fast::hash(&buf) != crc {
            return Err(DatasetError::Checksum(format!("frame {}", s.frame_ref)));
        }
        let [w, h] = self.manifest.resolution;
        let px = w as usize * h as usize;
        let depth = buf[3 * px..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        buf.truncate(3 * px);
        Ok(Frame {
            width: w,
            height: h,
            rgb: buf,
            depth,
            frame_index: s.frame_ref,
            timestamp: s.timestamp,
        })
    }

    /// Checks every frame and the whole-file checksum.
    pub fn verify(&self) -> Result<(), DatasetError> {
        let mut h = crc32fast::Hasher::new();
        let mut buf = vec![0u8; self.manifest.frame_bytes()];
        for (k, &(offset, crc)) in self.index.iter().enumerate() {
            self.frames.read_exact_at(&mut buf, offset)?;
            if crc32fast::hash(&buf) != crc {
                return Err(DatasetError::Checksum(format!("frame {k}")));
            }
            h.update(&buf);
        }
        if h.finalize() != self.manifest.frames_crc32 {
            return Err(DatasetError::Checksum(FRAMES.into()));
        }
        Ok(())
    }

    pub fn split(&self, train_fraction: f64) -> Result<(View, View), DatasetError> {
        split(&self.manifest.episodes, train_fraction)
    }
}
