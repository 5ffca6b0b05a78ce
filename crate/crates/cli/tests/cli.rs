mod common;

use std::io::{BufRead, BufReader};
use std::process::Stdio;
use std::time::{Duration, Instant};

use common::*;
use macpilot_core::zoo::{encode_checkpoint, ArchitectureConfig, Model, TrainingMetadata};
use macpilot_dataset::Dataset;

#[test]
fn every_subcommand_has_help() {
    for sub in ["record", "demo", "train", "evaluate", "ablate", "inspect", "recover", "serve"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(text(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = run(&["demo", "--track", "atlantis", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("oval, mini_monaco_2d, generated_track_2d"), "{}", text(&o));
    assert_eq!(run(&["demo", "--out", "y", "--wings"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_dataset_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model");
    let o = run(&["train", "--dataset", "/nonexistent/data", "--arch", "rnn_modified", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("does not exist"));
    assert!(!out.exists());
}

#[test]
fn bad_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 40);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"epochz": 3}"#).unwrap();
    let out = dir.path().join("m");
    let args = |cfg: &str, arch: &str| {
        run(&["train", "--dataset", data.to_str().unwrap(), "--arch", arch, "--config", cfg, "--out", out.to_str().unwrap()])
    };
    let o = args(cfg.to_str().unwrap(), "rnn_modified");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("epochz"));
    let o = args(small_config(dir.path()).to_str().unwrap(), "transformer");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("cnn3d_modified_plus1"));
}

#[test]
fn train_writes_artifacts_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 100);
    let cfg = small_config(dir.path());
    let train = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "train",
            "--dataset",
            data.to_str().unwrap(),
            "--arch",
            "rnn_modified",
            "--config",
            cfg.to_str().unwrap(),
            "--epochs",
            "3",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
        (out, text(&o))
    };
    let (a, log) = train("a");
    assert!(log.contains("seed: 5"));
    assert!(log.contains("\"epochs\":3") && log.contains("\"batch_size\":8"), "{log}");
    for f in ["model.mpck", "curves.csv", "curves.svg", "run.json", "train_report.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let run_manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_manifest["seed"], 5);
    assert_eq!(run_manifest["inputs"][0][1].as_str().unwrap().len(), 64);

    let (b, _) = train("b");
    assert_eq!(std::fs::read(a.join("model.mpck")).unwrap(), std::fs::read(b.join("model.mpck")).unwrap());

    // a used output directory is refused
    let o = run(&["train", "--dataset", data.to_str().unwrap(), "--arch", "rnn_modified", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = bin()
        .args(["demo", "--laps", "1", "--out", out.to_str().unwrap()])
        .env("MACPILOT_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("seed: 42"));
    let ds = Dataset::open(&out).unwrap();
    assert_eq!(ds.manifest().seed, Some(42));
    let o = run(&["inspect", out.to_str().unwrap(), "--verify"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o).contains(&format!("samples      {}", ds.len())), "{}", text(&o));
    assert!(text(&o).contains("verified"));
}

fn checkpoint(dir: &std::path::Path, shape: [usize; 3]) -> std::path::PathBuf {
    let cfg = ArchitectureConfig::builtin("rnn_modified", shape).unwrap();
    let p = dir.join(format!("m{}x{}.mpck", shape[1], shape[2]));
    std::fs::write(&p, encode_checkpoint(&Model::build(&cfg, 2).unwrap(), &TrainingMetadata::default())).unwrap();
    p
}

#[test]
fn evaluate_rejects_a_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ck = checkpoint(dir.path(), [4, 50, 50]);
    let o = run(&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--track", "oval"]);
    assert_eq!(o.status.code(), Some(2));
    let t = text(&o);
    assert!(t.contains("[4, 50, 50]") && t.contains("[4, 120, 160]"), "{t}");
}

#[test]
fn evaluate_defaults_to_thirty_laps() {
    let dir = tempfile::tempdir().unwrap();
    let ck = checkpoint(dir.path(), [4, 24, 32]);
    let out = dir.path().join("eval");
    let o = run(&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--track", "oval", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("\"laps\":30"));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report_00.json")).unwrap()).unwrap();
    assert_eq!(r["attempted_laps"], 30);
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(csv.starts_with("Model,oval\nrnn_modified,"), "{csv}");
}

fn spawn_recorder(out: &std::path::Path) -> (std::process::Child, String) {
    let mut child = bin()
        .args(["record", "--track", "oval", "--port", "0", "--tick-rate", "50", "--out", out.to_str().unwrap()])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let listening = loop {
        let l = lines.next().expect("recorder printed its address").unwrap();
        if l.starts_with("listening on") {
            break l;
        }
    };
    std::thread::spawn(move || for _ in lines {});
    (child, listening)
}

fn wait(child: &mut std::process::Child) -> Option<i32> {
    let t0 = Instant::now();
    loop {
        if let Some(s) = child.try_wait().unwrap() {
            return s.code();
        }
        assert!(t0.elapsed() < Duration::from_secs(20), "process did not exit");
        std::thread::sleep(Duration::from_millis(50));
    }
}

fn signal(child: &std::process::Child, sig: &str) {
    let ok = std::process::Command::new("kill").args([sig, &child.id().to_string()]).status().unwrap();
    assert!(ok.success());
}

#[test]
fn interrupted_recorder_finalizes_its_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("drive");
    let (mut child, line) = spawn_recorder(&out);
    assert!(line.contains("http://127.0.0.1:"), "{line}");
    std::thread::sleep(Duration::from_millis(800));
    signal(&child, "-INT");
    assert_eq!(wait(&mut child), Some(0));
    let ds = Dataset::open(&out).unwrap();
    assert!(ds.len() >= 10, "{}", ds.len());
    ds.verify().unwrap();
}

#[test]
fn killed_recorder_is_recoverable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("drive");
    let (mut child, _) = spawn_recorder(&out);
    std::thread::sleep(Duration::from_millis(800));
    signal(&child, "-KILL");
    wait(&mut child);
    let o = run(&["inspect", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("macpilot recover"));
    let o = run(&["recover", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    Dataset::open(&out).unwrap();
}

#[test]
fn ablate_writes_a_three_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 100);
    let cfg = small_config(dir.path());
    let out = dir.path().join("ablation");
    let o = run(&[
        "ablate",
        "--dataset",
        data.to_str().unwrap(),
        "--track",
        "oval",
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "1",
        "--laps",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["cnn3d_modified", "cnn3d_modified_minus1", "cnn3d_modified_plus1"]);
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("ablation.json")).unwrap()).unwrap();
    let v = a["variants"].as_array().unwrap();
    for x in v {
        assert_eq!(x["metadata"]["training"], v[0]["metadata"]["training"]);
        assert_eq!(x["metadata"]["dataset_id"], v[0]["metadata"]["dataset_id"]);
        assert_eq!(x["metadata"]["seed"], v[0]["metadata"]["seed"]);
    }
    let p: Vec<u64> = v.iter().map(|x| x["parameters"].as_u64().unwrap()).collect();
    assert!(p[0] < p[1] && p[1] < p[2]);
}
