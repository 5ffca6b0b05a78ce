use std::fmt::Write;

use crate::format::DatasetManifest;
use crate::store::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f32,
    pub hi: f32,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: impl Iterator<Item = f32>, lo: f32, hi: f32, bins: usize) -> Histogram {
        let mut counts = vec![0u64; bins];
        for v in values {
            let k = ((v - lo) / (hi - lo) * bins as f32).floor();
            counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }

    fn render(&self, out: &mut String) {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let width = (self.hi - self.lo) / self.counts.len() as f32;
        for (k, &c) in self.counts.iter().enumerate() {
            let lo = self.lo + k as f32 * width;
            let bar = "#".repeat((c * 40).div_ceil(max) as usize);
            let _ = writeln!(out, "  [{:>5.2}, {:>5.2}) {:>7} {bar}", lo, lo + width, c);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InspectReport {
    pub manifest: DatasetManifest,
    pub steering: Histogram,
    pub throttle: Histogram,
}

impl InspectReport {
    pub fn render(&self) -> String {
        let m = &self.manifest;
        let mut s = String::new();
        let _ = writeln!(s, "track        {}", m.track_id);
        let _ = writeln!(s, "format       v{}", m.format_version);
        let _ = writeln!(s, "capture      {} Hz", m.capture_fps);
        let _ = writeln!(
            s,
            "resolution   {}x{} rgb{}+depth{}",
            m.resolution[0], m.resolution[1], m.channels.rgb, m.channels.depth
        );
        let _ = writeln!(s, "samples      {}", m.sample_count);
        let _ = writeln!(s, "episodes     {}", m.episodes.len());
        for e in &m.episodes {
            let _ = writeln!(s, "  #{:<3} start {:>7} len {:>7}", e.id, e.start, e.len);
        }
        let _ = writeln!(s, "steering");
        self.steering.render(&mut s);
        let _ = writeln!(s, "throttle");
        self.throttle.render(&mut s);
        s
    }
}

pub fn inspect(ds: &Dataset) -> InspectReport {
    InspectReport {
        manifest: ds.manifest().clone(),
        steering: Histogram::build(ds.samples().iter().map(|s| s.steering), -1.0, 1.0, 20),
        throttle: Histogram::build(ds.samples().iter().map(|s| s.throttle), 0.0, 1.0, 10),
    }
}
