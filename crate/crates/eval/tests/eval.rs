use std::sync::Arc;

use macpilot_core::zoo::{encode_checkpoint, ArchitectureConfig, Model, TrainingMetadata};
use macpilot_core::ControlCommand;
use macpilot_dataset::Dataset;
use macpilot_eval::*;
use macpilot_sim::{builtin_track, BoundaryKind, Frame, Track, VehicleState, BUILTIN_TRACKS};
use sha2::{Digest, Sha256};

fn track(id: &str) -> Arc<Track> {
    Arc::new(builtin_track(id).unwrap())
}

struct Constant(ControlCommand);

impl Policy for Constant {
    fn needs_frame(&self) -> bool {
        false
    }
    fn act(&mut self, _: Option<&Frame>, _: &VehicleState, _: &Track) -> ControlCommand {
        self.0
    }
}

fn report(model: &str, track: &str, laps: &[f64]) -> LapReport {
    LapReport {
        model_id: model.into(),
        track_id: track.into(),
        seed: 0,
        attempted_laps: laps.len().max(1),
        lap_times: laps.to_vec(),
        deviations: Vec::new(),
        response_speed: Vec::new(),
        response_missed: 0,
        dnf_reason: None,
        sim_time: laps.iter().sum(),
    }
}

fn small_model(seed: u64) -> Model {
    let cfg = ArchitectureConfig::builtin("rnn_modified", [4, 24, 32]).unwrap();
    Model::build(&cfg, seed).unwrap()
}

#[test]
fn oracle_laps_the_oval_cleanly() {
    let r = run_laps(&mut OraclePolicy::default(), "oracle", track("oval"), 5, 3, &EvalOptions::default()).unwrap();
    assert_eq!(r.lap_times.len(), 5);
    assert!(r.deviations.is_empty(), "{:?}", r.deviations);
    assert_eq!(r.dnf_reason, None);
    assert!(r.lap_times.iter().all(|&t| t > 0.0));
}

#[test]
fn oracle_lap_time_is_length_over_speed() {
    let oracle = OraclePolicy::default();
    let speed = oracle.throttle as f64 * oracle.vehicle.v_max;
    for id in BUILTIN_TRACKS {
        let t = track(id);
        let r = run_laps(&mut oracle.clone(), "oracle", t.clone(), 3, 0, &EvalOptions::default()).unwrap();
        assert!(r.deviations.is_empty(), "{id}");
        let ideal = t.length() / speed;
        for lap in &r.lap_times {
            assert!((lap - ideal).abs() / ideal < 0.02, "{id}: {lap} vs {ideal}");
        }
    }
}

#[test]
fn full_throttle_straight_fails_on_curved_tracks() {
    for id in BUILTIN_TRACKS {
        let t = track(id);
        let r = run_laps(&mut Constant(ControlCommand::new(0.0, 1.0)), "full", t.clone(), 2, 0, &EvalOptions::default())
            .unwrap();
        assert!(r.lap_times.is_empty(), "{id}");
        match t.boundary_kind() {
            BoundaryKind::Walls => assert_eq!(r.dnf_reason, Some(DnfReason::Crash), "{id}"),
            BoundaryKind::Open => assert!(!r.deviations.is_empty(), "{id}"),
        }
    }
}

#[test]
fn stopped_car_times_out() {
    let opts = EvalOptions {
        lap_timeout: Some(3.0),
        ..EvalOptions::default()
    };
    let r = run_laps(&mut Constant(ControlCommand::IDLE), "idle", track("oval"), 1, 0, &opts).unwrap();
    assert_eq!(r.dnf_reason, Some(DnfReason::Timeout));
    assert!((r.sim_time - 3.05).abs() < 1e-9);
}

#[test]
fn zero_laps_is_refused() {
    let e = run_laps(&mut OraclePolicy::default(), "o", track("oval"), 0, 0, &EvalOptions::default());
    assert!(matches!(e, Err(EvalError::Config(_))));
}

#[test]
fn model_runs_are_bit_identical() {
    let opts = EvalOptions {
        lap_timeout: Some(4.0),
        ..EvalOptions::default()
    };
    let run = || {
        let mut p = ModelPolicy::new(small_model(3), &opts.camera).unwrap();
        run_laps(&mut p, "rnn_modified", track("mini_monaco_2d"), 1, 11, &opts).unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.sim_time > 1.0);
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn lap_report_json_round_trip() {
    let mut r = report("m", "oval", &[15.05, 15.0]);
    r.deviations.push(DeviationEvent {
        sim_time: 3.25,
        lateral_offset: -0.41,
        kind: DeviationKind::WallContact,
    });
    r.response_speed = vec![0.1, 0.35];
    r.dnf_reason = Some(DnfReason::Crash);
    let s = r.to_json();
    assert!(s.contains("\"wall_contact\"") && s.contains("\"crash\""));
    assert_eq!(LapReport::from_json(&s).unwrap(), r);
}

#[test]
fn evaluation_leaves_the_checkpoint_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.mpck");
    std::fs::write(&path, encode_checkpoint(&small_model(5), &TrainingMetadata::default())).unwrap();
    let hash = || Sha256::digest(std::fs::read(&path).unwrap());
    let before = hash();
    let opts = EvalOptions {
        lap_timeout: Some(1.0),
        ..EvalOptions::default()
    };
    let r = evaluate_checkpoint(&path, track("oval"), 1, 0, &opts).unwrap();
    assert_eq!(r.model_id, "rnn_modified");
    assert_eq!(hash(), before);
}

#[test]
fn incompatible_checkpoint_is_a_config_error() {
    let cfg = ArchitectureConfig::builtin("rnn_modified", [4, 48, 48]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.mpck");
    let model = Model::build(&cfg, 0).unwrap();
    std::fs::write(&path, encode_checkpoint(&model, &TrainingMetadata::default())).unwrap();
    match evaluate_checkpoint(&path, track("oval"), 1, 0, &EvalOptions::default()) {
        Err(EvalError::Config(m)) => {
            assert!(m.contains("[4, 48, 48]") && m.contains("[4, 120, 160]"), "{m}")
        }
        other => panic!("{other:?}"),
    }
    let big = ArchitectureConfig::builtin("rnn_modified", [4, 240, 320]).unwrap();
    let e = ModelPolicy::new(Model::build(&big, 0).unwrap(), &EvalOptions::default().camera);
    assert!(matches!(e, Err(EvalError::Config(_))));
}

#[test]
fn summary_statistics() {
    let s = summarize(&report("m", "t", &[35.0, 36.0, 37.0]));
    assert_eq!(s.mean, Some(36.0));
    assert_eq!(s.std, Some(1.0));
    let s = summarize(&report("m", "t", &[10.0, 10.0, 10.0]));
    assert_eq!((s.mean, s.std), (Some(10.0), Some(0.0)));
    assert_eq!(s.deviations, 0);
    assert_eq!(s.dnf, None);
    let s = summarize(&report("m", "t", &[12.5]));
    assert_eq!((s.mean, s.std), (Some(12.5), None));
}

#[test]
fn no_completed_lap_carries_dnf() {
    let mut r = report("m", "t", &[]);
    r.dnf_reason = Some(DnfReason::Crash);
    let s = summarize(&r);
    assert_eq!(s.mean, None);
    assert_eq!(s.dnf, Some(DnfReason::Crash));
}

/// Lap sets whose means print as the given values.
fn with_mean(m: f64) -> Vec<f64> {
    vec![m - 0.4, m, m + 0.4]
}

#[test]
fn table_marks_the_fastest_model() {
    let reports = vec![
        report("rnn_default", "mini_monaco_2d", &with_mean(36.24)),
        report("rnn_modified", "mini_monaco_2d", &with_mean(36.56)),
        report("cnn3d_modified", "mini_monaco_2d", &with_mean(35.10)),
    ];
    let table = compare(&reports);
    let names: Vec<&str> = table.rows.iter().map(|r| r.model_id.as_str()).collect();
    assert_eq!(names, ["cnn3d_modified", "rnn_default", "rnn_modified"]);
    assert_eq!(table.best, vec![Some(0)]);
    let out = render_table(&table);
    assert!(out.text.contains("**35.10 (±0.40)**"), "{}", out.text);
    assert!(out.text.contains("| rnn_default    | 36.24 (±0.40)"), "{}", out.text);
    assert_eq!(out.text.matches("**").count(), 2);
    assert_eq!(
        out.csv,
        "Model,mini_monaco_2d\ncnn3d_modified,35.10 (±0.40)\nrnn_default,36.24 (±0.40)\nrnn_modified,36.56 (±0.40)\n"
    );
}

#[test]
fn single_report_is_trivially_best() {
    let table = compare(&[report("only", "oval", &[15.0, 15.1])]);
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.best, vec![Some(0)]);
    assert!(render_table(&table).text.contains("**15.05 (±0.07)**"));
}

#[test]
fn dnf_cells_do_not_compete() {
    let mut plus1 = report("cnn3d_modified_plus1", "mini_monaco_2d", &[30.0]);
    plus1.dnf_reason = Some(DnfReason::Crash);
    let table = compare(&[
        plus1,
        report("cnn3d_modified", "mini_monaco_2d", &with_mean(35.56)),
        report("cnn3d_modified_minus1", "mini_monaco_2d", &with_mean(34.10)),
        report("cnn3d_modified", "oval", &[15.0, 15.2]),
    ]);
    assert_eq!(table.tracks, ["mini_monaco_2d", "oval"]);
    assert_eq!(table.best, vec![Some(1), Some(0)]);
    let out = render_table(&table);
    assert!(out.csv.contains("cnn3d_modified_plus1,Overfit/DNF,\n"), "{}", out.csv);
    assert!(out.text.contains("**34.10 (±0.40)**"));
    assert!(!out.text.contains("**Overfit/DNF**"));
}

#[test]
fn demonstrations_label_the_clean_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let opts = DemoOptions {
        laps: 2,
        seed: 4,
        ..DemoOptions::default()
    };
    let m = record_demonstration(track("oval"), &opts, &out).unwrap();
    assert_eq!(m.episodes.len(), 2);
    assert_eq!(m.track_id, "oval");
    let ds = Dataset::open(&out).unwrap();
    ds.verify().unwrap();
    // two laps plus an almost full lap of run-in, about 15 s each at 20 Hz
    assert!((850..950).contains(&ds.len()), "{}", ds.len());
    assert!(ds.samples().iter().all(|s| s.throttle == 0.5));
    let steer: Vec<f32> = ds.samples().iter().map(|s| s.steering).collect();
    assert!(steer.iter().any(|&s| s < -0.1) && steer.iter().any(|&s| s > 0.05));

    let again = dir.path().join("again");
    let m2 = record_demonstration(track("oval"), &opts, &again).unwrap();
    assert_eq!(m.samples_crc32, m2.samples_crc32);
    assert_eq!(m.frames_crc32, m2.frames_crc32);
}
