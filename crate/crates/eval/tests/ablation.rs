use std::sync::Arc;

use macpilot_dataset::Dataset;
use macpilot_eval::*;
use macpilot_sim::builtin_track;
use macpilot_train::TrainConfig;

#[test]
fn ablation_trains_three_siblings_alike() {
    let dir = tempfile::tempdir().unwrap();
    let track = Arc::new(builtin_track("oval").unwrap());
    let data = dir.path().join("demo");
    let demo = DemoOptions {
        laps: 1,
        ..DemoOptions::default()
    };
    record_demonstration(track.clone(), &demo, &data).unwrap();
    let ds = Dataset::open(&data).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 16,
        window_stride: 8,
        input_size: [32, 24],
        seed: 9,
        ..TrainConfig::default()
    };
    let opts = EvalOptions {
        lap_timeout: Some(2.0),
        ..EvalOptions::default()
    };
    let out = dir.path().join("ablation");
    let r = ablation_run(&cfg, &ds, track, 1, 0, &opts, &out).unwrap();

    let mut rows: Vec<&str> = r.table.rows.iter().map(|r| r.model_id.as_str()).collect();
    rows.sort();
    assert_eq!(rows, ["cnn3d_modified", "cnn3d_modified_minus1", "cnn3d_modified_plus1"]);
    assert_eq!(r.table.tracks, ["oval"]);

    let names: Vec<&str> = r.variants.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ABLATION_VARIANTS);
    let first = &r.variants[0].metadata;
    for v in &r.variants {
        assert!(v.checkpoint.starts_with(out.join(&v.name)));
        let m = &v.metadata;
        assert_eq!(m.dataset_id, first.dataset_id, "{}", v.name);
        assert_eq!(m.seed, first.seed, "{}", v.name);
        assert_eq!(m.training, first.training, "{}", v.name);
        assert_eq!(m.epochs, first.epochs, "{}", v.name);
    }
    assert_eq!(first.seed, 9);
    let counts: Vec<usize> = r.variants.iter().map(|v| v.parameter_count).collect();
    assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
}
