#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use macpilot_dataset::{open_recording, RecordingOptions};
use macpilot_sim::{builtin_track, CameraConfig, ControlCommand, Simulator};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_macpilot"));
    c.env_remove("MACPILOT_SEED").env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

pub fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// `n` samples on the oval in two episodes, weaving gently.
pub fn fixture(dir: &Path, n: usize) -> PathBuf {
    let out = dir.join("fixture");
    let track = Arc::new(builtin_track("oval").unwrap());
    let cam = CameraConfig::default();
    let mut rec = open_recording(RecordingOptions::new("oval", cam), &out).unwrap();
    let mut sim = Simulator::new(track, cam, 1).unwrap();
    for k in 0..n {
        let cmd = ControlCommand::new(-0.3 + 0.2 * (k as f32 / 9.0).sin(), 0.4);
        rec.append(&sim.render(), cmd).unwrap();
        sim.tick(cmd);
        if k + 1 == n / 2 {
            rec.end_episode().unwrap();
        }
    }
    rec.end_episode().unwrap();
    rec.finalize().unwrap();
    out
}

/// A small, fast training setup.
pub fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.json");
    std::fs::write(&p, r#"{"input_size": [32, 24], "batch_size": 8, "epochs": 2}"#).unwrap();
    p
}
