use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "run.json";

/// What a run did, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: Value,
    /// Input files and their SHA-256.
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: Value) -> RunManifest {
        RunManifest {
            tool: "macpilot",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().collect(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push((path.to_path_buf(), sha256_file(path)?));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        std::fs::write(dir.join(RUN_MANIFEST), s)
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Prints the resolved settings so every run can be repeated.
pub fn announce(command: &str, seed: u64, config: &Value) {
    println!("macpilot {command}");
    println!("seed: {seed}");
    println!("config: {config}");
}
