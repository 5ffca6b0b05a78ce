use std::ops::Range;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::format::EpisodeInfo;
use crate::DatasetError;

/// A subset of samples as contiguous per-episode ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View {
    pub segments: Vec<(u32, Range<usize>)>,
}

impl View {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|(_, r)| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().flat_map(|(_, r)| r.clone())
    }
}

/// Per episode, the first `floor(fraction * len)` samples go to training and
/// the rest to validation. Nothing is shuffled.
pub fn split(episodes: &[EpisodeInfo], train_fraction: f64) -> Result<(View, View), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Contract(format!(
            "train fraction {train_fraction} must be strictly between 0 and 1"
        )));
    }
    if episodes.iter().all(|e| e.len == 0) {
        return Err(DatasetError::Contract("cannot split an empty dataset".into()));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for e in episodes {
        let start = e.start as usize;
        let len = e.len as usize;
        let cut = (train_fraction * len as f64).floor() as usize;
        if cut > 0 {
            train.push((e.id, start..start + cut));
        }
        if cut < len {
            val.push((e.id, start + cut..start + len));
        }
    }
    Ok((View { segments: train }, View { segments: val }))
}

/// `len` consecutive samples starting at `start`; the target is the command
/// of the last one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
    pub episode_id: u32,
}

impl Window {
    pub fn target(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn indices(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Windows {
    pub windows: Vec<Window>,
    /// Segments too short for one window.
    pub skipped: usize,
}

/// Sliding windows inside each segment of `view`. With a seed the order is
/// shuffled deterministically, otherwise it is chronological.
pub fn make_windows(view: &View, t: usize, stride: usize, seed: Option<u64>) -> Result<Windows, DatasetError> {
    if t == 0 || stride == 0 {
        return Err(DatasetError::Contract("window length and stride must be at least 1".into()));
    }
    let mut windows = Vec::new();
    let mut skipped = 0;
    for (id, r) in &view.segments {
        if r.len() < t {
            skipped += 1;
            log::warn!("episode {id}: {} samples is shorter than a window of {t}", r.len());
            continue;
        }
        windows.extend((r.start..=r.end - t).step_by(stride).map(|start| Window {
            start,
            len: t,
            episode_id: *id,
        }));
    }
    if let Some(seed) = seed {
        windows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Windows { windows, skipped })
}
