use std::path::{Path, PathBuf};
use std::sync::Arc;

use macpilot_dataset::Dataset;
use macpilot_sim::{builtin_track, Track, BUILTIN_TRACKS};
use macpilot_train::TrainConfig;
use serde_json::Value;

use crate::error::{usage, Result};

/// A built-in id, or a path to a track definition.
pub fn load_track(spec: &str) -> Result<Arc<Track>> {
    if let Ok(t) = builtin_track(spec) {
        return Ok(Arc::new(t));
    }
    let p = Path::new(spec);
    if p.extension().is_some_and(|e| e == "json") && p.is_file() {
        let text = std::fs::read_to_string(p)?;
        return Track::from_json(&text)
            .map(Arc::new)
            .map_err(|e| usage(format!("{}: {e}", p.display())));
    }
    Err(usage(format!(
        "unknown track {spec:?}; built-in tracks: {}",
        BUILTIN_TRACKS.join(", ")
    )))
}

pub fn open_dataset(path: &Path) -> Result<Dataset> {
    if !path.is_dir() {
        return Err(usage(format!("dataset {} does not exist", path.display())));
    }
    Dataset::open(path).map_err(|e| usage(format!("cannot open dataset {}: {e}", path.display())))
}

/// Overlays: built-in defaults, then the config file, then flags.
pub fn training_config(file: Option<&PathBuf>, flags: &[(&str, Option<Value>)]) -> Result<TrainConfig> {
    let mut v = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let Value::Object(entries) = file else {
            return Err(usage(format!("config {} must be a JSON object", path.display())));
        };
        obj.extend(entries);
    }
    for (k, val) in flags {
        if let Some(val) = val {
            obj.insert(k.to_string(), val.clone());
        }
    }
    let cfg: TrainConfig = serde_json::from_value(v).map_err(|e| usage(format!("training config: {e}")))?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Flag, then `MACPILOT_SEED` (both via clap), then the config, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config).unwrap_or(0)
}

/// Refuses to reuse an output directory that already holds files.
pub fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() && std::fs::read_dir(path)?.next().is_some() {
        return Err(usage(format!("output directory {} is not empty", path.display())));
    }
    std::fs::create_dir_all(path)?;
    Ok(())
}
