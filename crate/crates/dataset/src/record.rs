use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use macpilot_core::ControlCommand;
use macpilot_sim::{CameraConfig, Frame};
use serde::{Deserialize, Serialize};

use crate::format::*;
use crate::DatasetError;

/// Recorder settings, written next to the data so an interrupted session
/// can be finalized later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingOptions {
    pub track_id: String,
    pub camera: CameraConfig,
    pub seed: Option<u64>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl RecordingOptions {
    pub fn new(track_id: &str, camera: CameraConfig) -> RecordingOptions {
        RecordingOptions {
            track_id: track_id.to_string(),
            camera,
            seed: None,
            metadata: serde_json::Value::Null,
        }
    }
}

const SESSION: &str = "session.json";

fn partial_dir(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    out.with_file_name(name)
}

/// An open recording. Data lands in `<out>.partial/` and only becomes
/// `<out>/` on [`RecordingSession::finalize`] (or [`recover`]).
pub struct RecordingSession {
    out: PathBuf,
    partial: PathBuf,
    opts: RecordingOptions,
    frames: BufWriter<File>,
    index: BufWriter<File>,
    samples: BufWriter<File>,
    journal: File,
    frames_len: u64,
    count: u64,
    episodes: Vec<EpisodeInfo>,
    episode_start: u64,
    last_timestamp: Option<f64>,
}

pub fn open_recording(opts: RecordingOptions, out: &Path) -> Result<RecordingSession, DatasetError> {
    opts.camera
        .validate()
        .map_err(|e| DatasetError::Format(e.to_string()))?;
    if out.exists() {
        return Err(DatasetError::Contract(format!("{} already exists", out.display())));
    }
    let partial = partial_dir(out);
    if partial.exists() {
        return Err(DatasetError::Contract(format!(
            "{} exists; recover or remove it first",
            partial.display()
        )));
    }
    fs::create_dir_all(&partial)?;
    fs::write(partial.join(SESSION), serde_json::to_vec_pretty(&opts).unwrap())?;
    let create = |name: &str| {
        OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(partial.join(name))
    };
    Ok(RecordingSession {
        frames: BufWriter::new(create(FRAMES)?),
        index: BufWriter::new(create(INDEX)?),
        samples: BufWriter::new(create(SAMPLES)?),
        journal: create(JOURNAL)?,
        out: out.to_path_buf(),
        partial,
        opts,
        frames_len: 0,
        count: 0,
        episodes: Vec::new(),
        episode_start: 0,
        last_timestamp: None,
    })
}

impl RecordingSession {
    pub fn sample_count(&self) -> u64 {
        self.count
    }

    pub fn episodes(&self) -> &[EpisodeInfo] {
        &self.episodes
    }

    pub fn partial_path(&self) -> &Path {
        &self.partial
    }

    pub fn out_path(&self) -> &Path {
        &self.out
    }

    /// Stores one frame with the command that was applied on it.
    pub fn append(&mut self, frame: &Frame, cmd: ControlCommand) -> Result<Sample, DatasetError> {
        let cam = &self.opts.camera;
        if (frame.width, frame.height) != (cam.width, cam.height) {
            return Err(DatasetError::Format(format!(
                "frame is {}x{}, session records {}x{}",
                frame.width, frame.height, cam.width, cam.height
            )));
        }
        let px = frame.pixels();
        if frame.rgb.len() != 3 * px || frame.depth.len() != px {
            return Err(DatasetError::Format("frame buffers do not match its size".into()));
        }
        if self.last_timestamp.is_some_and(|t| frame.timestamp <= t) {
            return Err(DatasetError::Format(format!(
                "timestamp {} does not increase",
                frame.timestamp
            )));
        }
        let (cmd, _) = ControlCommand::clamped(cmd.steering, cmd.throttle);
        let bytes = encode_frame(&frame.rgb, &frame.depth);
        let crc = crc32fast::hash(&bytes);
        self.frames.write_all(&bytes)?;
        self.index.write_all(&index_entry(self.frames_len, crc))?;
        let sample = Sample {
            frame_ref: self.count,
            steering: cmd.steering,
            throttle: cmd.throttle,
            timestamp: frame.timestamp,
            episode_id: self.episodes.len() as u32,
        };
        let mut line = serde_json::to_vec(&sample).unwrap();
        line.push(b'\n');
        self.samples.write_all(&line)?;
        self.frames_len += bytes.len() as u64;
        self.count += 1;
        self.last_timestamp = Some(frame.timestamp);
        Ok(sample)
    }

    /// Closes the running episode and makes it durable. Returns `None` if it
    /// was empty.
    pub fn end_episode(&mut self) -> Result<Option<EpisodeInfo>, DatasetError> {
        let len = self.count - self.episode_start;
        if len == 0 {
            return Ok(None);
        }
        for w in [&mut self.frames, &mut self.index, &mut self.samples] {
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        let ep = EpisodeInfo {
            id: self.episodes.len() as u32,
            start: self.episode_start,
            len,
        };
        let mut line = serde_json::to_vec(&ep).unwrap();
        line.push(b'\n');
        self.journal.write_all(&line)?;
        self.journal.sync_data()?;
        self.episodes.push(ep);
        self.episode_start = self.count;
        self.last_timestamp = None;
        Ok(Some(ep))
    }

    /// Ends the current episode, writes the manifest and moves the
    /// directory into place.
    pub fn finalize(mut self) -> Result<DatasetManifest, DatasetError> {
        self.end_episode()?;
        drop(self.frames);
        drop(self.index);
        drop(self.samples);
        drop(self.journal);
        publish(&self.partial, &self.out, &self.opts, self.episodes)
    }
}

fn file_crc(path: &Path) -> Result<u32, DatasetError> {
    let mut h = crc32fast::Hasher::new();
    let mut f = BufReader::new(File::open(path)?);
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize())
}

fn sync_dir(dir: &Path) {
    // best effort; not every platform can fsync a directory
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

fn publish(
    partial: &Path,
    out: &Path,
    opts: &RecordingOptions,
    episodes: Vec<EpisodeInfo>,
) -> Result<DatasetManifest, DatasetError> {
    let sample_count = episodes.iter().map(|e| e.len).sum();
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        track_id: opts.track_id.clone(),
        capture_fps: CAPTURE_FPS,
        resolution: [opts.camera.width, opts.camera.height],
        channels: ChannelSpec::RGBD,
        camera: opts.camera,
        sample_count,
        episodes,
        seed: opts.seed,
        metadata: opts.metadata.clone(),
        frames_crc32: file_crc(&partial.join(FRAMES))?,
        samples_crc32: file_crc(&partial.join(SAMPLES))?,
    };
    let tmp = partial.join("manifest.json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&serde_json::to_vec_pretty(&manifest).unwrap())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, partial.join(MANIFEST))?;
    fs::remove_file(partial.join(JOURNAL))?;
    fs::remove_file(partial.join(SESSION))?;
    sync_dir(partial);
    fs::rename(partial, out)?;
    if let Some(parent) = out.parent() {
        sync_dir(parent);
    }
    Ok(manifest)
}

/// Finalizes an interrupted recording of `out`, keeping every journaled
/// episode whose samples and frames are intact, up to the first damaged one.
pub fn recover(out: &Path) -> Result<DatasetManifest, DatasetError> {
    let partial = partial_dir(out);
    if !partial.is_dir() {
        return Err(DatasetError::Contract(format!("no interrupted recording at {}", partial.display())));
    }
    if out.exists() {
        return Err(DatasetError::Contract(format!("{} already exists", out.display())));
    }
    let opts: RecordingOptions = serde_json::from_slice(&fs::read(partial.join(SESSION))?)
        .map_err(|e| DatasetError::Format(format!("session.json: {e}")))?;
    let fb = frame_bytes(opts.camera.width, opts.camera.height) as u64;

    let read_or_empty = |name: &str| -> Result<Vec<u8>, DatasetError> {
        match fs::read(partial.join(name)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    };
    let journal = read_or_empty(JOURNAL)?;
    let index = read_or_empty(INDEX)?;
    let samples_raw = read_or_empty(SAMPLES)?;
    let mut frames = match File::open(partial.join(FRAMES)) {
        Ok(f) => Some(f),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };

    // complete sample lines with their byte ranges
    let mut lines: Vec<(Sample, usize)> = Vec::new();
    let mut pos = 0usize;
    for line in samples_raw.split_inclusive(|&b| b == b'\n') {
        if line.last() != Some(&b'\n') {
            break;
        }
        match serde_json::from_slice::<Sample>(&line[..line.len() - 1]) {
            Ok(s) => lines.push((s, pos + line.len())),
            Err(_) => break,
        }
        pos += line.len();
    }

    let mut kept: Vec<EpisodeInfo> = Vec::new();
    let mut count = 0u64;
    let mut buf = vec![0u8; fb as usize];
    'episodes: for line in BufReader::new(&journal[..]).lines() {
        let Ok(line) = line else { break };
        let Ok(ep) = serde_json::from_str::<EpisodeInfo>(&line) else { break };
        if ep.id as usize != kept.len() || ep.start != count || ep.len == 0 {
            break;
        }
        for k in ep.start..ep.start + ep.len {
            let Some((s, _)) = lines.get(k as usize) else { break 'episodes };
            if s.frame_ref != k || s.episode_id != ep.id {
                break 'episodes;
            }
            let at = k as usize * INDEX_ENTRY;
            let Some(entry) = index.get(at..at + INDEX_ENTRY) else { break 'episodes };
            let (offset, crc) = parse_index_entry(entry);
            if offset != k * fb {
                break 'episodes;
            }
            let Some(f) = frames.as_mut() else { break 'episodes };
            if read_at(f, offset, &mut buf).is_err() || crc32fast::hash(&buf) != crc {
                break 'episodes;
            }
        }
        count += ep.len;
        kept.push(ep);
    }
    let recovered_ep_ids: Vec<u32> = kept.iter().map(|e| e.id).collect();
    log::info!(
        "recovered {count} samples in episodes {recovered_ep_ids:?} from {}",
        partial.display()
    );

    let sample_end = if count == 0 { 0 } else { lines[count as usize - 1].1 };
    drop(frames.take());
    let truncate = |name: &str, len: u64| -> Result<(), DatasetError> {
        let f = OpenOptions::new().create(true).write(true).truncate(false).open(partial.join(name))?;
        f.set_len(len)?;
        f.sync_all()?;
        Ok(())
    };
    truncate(FRAMES, count * fb)?;
    truncate(INDEX, count * INDEX_ENTRY as u64)?;
    truncate(SAMPLES, sample_end as u64)?;
    if !partial.join(JOURNAL).exists() {
        File::create(partial.join(JOURNAL))?;
    }
    let _ = fs::remove_file(partial.join("manifest.json.tmp"));
    publish(&partial, out, &opts, kept)
}

fn read_at(f: &mut File, offset: u64, buf: &mut [u8]) -> std::io::Result<()> {
    use std::io::{Seek, SeekFrom};
    f.seek(SeekFrom::Start(offset))?;
    f.read_exact(buf)
}
