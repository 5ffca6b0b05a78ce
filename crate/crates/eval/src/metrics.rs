use serde::{Deserialize, Serialize};

use crate::run::{DeviationEvent, DeviationKind, DnfReason, LapReport};

/// One observation of a continuous trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub lateral_offset: f64,
    pub wall_contact: bool,
}

/// Turns per-tick flags into events: an excursion or a wall contact
/// counts once, on its rising edge, however long it lasts.
#[derive(Clone, Debug, Default)]
pub struct EdgeDetector {
    off: bool,
    wall: bool,
}

impl EdgeDetector {
    pub fn push(&mut self, s: &TrajectorySample, half_width: f64) -> Vec<DeviationEvent> {
        let mut out = Vec::new();
        let off = s.lateral_offset.abs() > half_width;
        if off && !self.off {
            out.push(DeviationEvent {
                sim_time: s.time,
                lateral_offset: s.lateral_offset,
                kind: DeviationKind::OffTrack,
            });
        }
        if s.wall_contact && !self.wall {
            out.push(DeviationEvent {
                sim_time: s.time,
                lateral_offset: s.lateral_offset,
                kind: DeviationKind::WallContact,
            });
        }
        self.off = off;
        self.wall = s.wall_contact;
        out
    }
}

pub fn count_deviation_edges(samples: &[TrajectorySample], half_width: f64) -> Vec<DeviationEvent> {
    let mut det = EdgeDetector::default();
    samples.iter().flat_map(|s| det.push(s, half_width)).collect()
}

/// Condensed view of one [`LapReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model_id: String,
    pub track_id: String,
    pub completed_laps: usize,
    /// Absent when no lap was completed.
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two laps.
    pub std: Option<f64>,
    pub deviations: usize,
    pub response_speed: Option<f64>,
    pub dnf: Option<DnfReason>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn summarize(report: &LapReport) -> Summary {
    let laps = &report.lap_times;
    let m = mean(laps);
    let std = m.filter(|_| laps.len() >= 2).map(|m| {
        let ss: f64 = laps.iter().map(|t| (t - m).powi(2)).sum();
        (ss / (laps.len() - 1) as f64).sqrt()
    });
    let dnf = report
        .dnf_reason
        .or_else(|| laps.is_empty().then_some(DnfReason::Timeout));
    Summary {
        model_id: report.model_id.clone(),
        track_id: report.track_id.clone(),
        completed_laps: laps.len(),
        mean: m,
        std,
        deviations: report.deviations.len(),
        response_speed: mean(&report.response_speed),
        dnf,
    }
}
