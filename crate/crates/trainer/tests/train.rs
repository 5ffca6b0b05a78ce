use macpilot_core::nn::{NormMode, Tape, Tensor};
use macpilot_core::zoo::{decode_checkpoint, ArchitectureConfig, Model, TrainingMetadata, BUILTIN_NAMES};
use macpilot_dataset::{make_windows, View, Window};
use macpilot_train::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mse_of_equal_tensors_is_zero() {
    let a = Tensor::new(&[3, 2], vec![0.1, -0.4, 0.7, 0.2, -1.0, 0.9]).unwrap();
    assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
}

#[test]
fn mse_of_unit_offset_is_one() {
    let a = Tensor::new(&[2, 2], vec![0.5, 0.25, -0.5, 1.0]).unwrap();
    let b = a.map(|v| v - 1.0);
    assert_eq!(mse_loss(&a, &b).unwrap(), 1.0);
}

#[test]
fn mse_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 3, 17, 64] {
        let p: Vec<f32> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: Vec<f32> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut acc = 0f64;
        for i in 0..2 * n {
            let d = p[i] as f64 - t[i] as f64;
            acc += d * d;
        }
        let want = acc / (2 * n) as f64;
        let got = mse_loss(
            &Tensor::new(&[n, 2], p).unwrap(),
            &Tensor::new(&[n, 2], t).unwrap(),
        )
        .unwrap();
        assert!((got as f64 - want).abs() < 1e-6);
    }
    let a = Tensor::<f32>::zeros(&[2, 2]);
    assert!(mse_loss(&a, &Tensor::zeros(&[4, 1])).is_err());
}

#[test]
fn adam_ignores_zero_gradients() {
    let cfg = TrainConfig::default();
    let mut p = Tensor::new(&[3], vec![0.5f32, -1.0, 2.0]).unwrap();
    let before = p.clone();
    let mut opt = Adam::new([3], &cfg);
    let g = [0.0f32; 3];
    adam_step(&mut [&mut p], &[Some(&g)], &mut opt);
    assert_eq!(p, before);
    assert_eq!(opt.m, vec![vec![0.0; 3]]);
    assert_eq!(opt.v, vec![vec![0.0; 3]]);
}

#[test]
fn adam_first_step_matches_hand_formula() {
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let w0 = [0.3f32, -0.2, 1.5, 0.0];
    let g = [0.8f32, -0.05, 3.0, -1e-3];
    let mut p = Tensor::new(&[4], w0.to_vec()).unwrap();
    let mut opt = Adam::new([4], &cfg);
    adam_step(&mut [&mut p], &[Some(&g)], &mut opt);
    for i in 0..4 {
        let gi = g[i] as f64;
        // with zero moments m_hat = g and v_hat = g^2
        let m = (1.0 - 0.9) * gi / (1.0 - 0.9);
        let v = (1.0 - 0.999) * gi * gi / (1.0 - 0.999);
        let want = w0[i] as f64 - 1e-3 * m / (v.sqrt() + 1e-8);
        assert!((p.data()[i] as f64 - want).abs() < 1e-7, "{i}");
        let step = w0[i] - p.data()[i];
        assert_eq!(step.signum(), g[i].signum());
        assert!((step.abs() as f64 - 1e-3).abs() < 1e-5);
    }
}

#[test]
fn adam_treats_identical_gradients_identically() {
    let cfg = TrainConfig::default();
    let mut a = Tensor::new(&[2], vec![0.1f32, 0.2]).unwrap();
    let mut b = a.clone();
    let mut opt = Adam::new([2, 2], &cfg);
    for k in 0..5 {
        let g = [0.3f32 * k as f32 - 0.4, 0.05];
        adam_step(&mut [&mut a, &mut b], &[Some(&g), Some(&g)], &mut opt);
        assert_eq!(a, b);
    }
    // unreached parameters stay put
    let mut c = Tensor::new(&[1], vec![4.0f32]).unwrap();
    let mut opt = Adam::new([1], &cfg);
    adam_step(&mut [&mut c], &[None], &mut opt);
    assert_eq!(c.data(), &[4.0]);
}

#[test]
fn constant_validation_stops_at_epoch_four() {
    let mut s = EarlyStopper::new(3);
    let mut stopped_at = None;
    for epoch in 1..=50 {
        let (_, stop) = s.observe(0.25);
        if stop {
            stopped_at = Some(epoch);
            break;
        }
    }
    assert_eq!(stopped_at, Some(4));
}

/// Random inputs with smooth random targets, one episode.
fn synthetic(n: usize, shape: [usize; 3], seed: u64) -> PreparedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let numel: usize = shape.iter().product();
    PreparedData {
        frame_shape: shape,
        inputs: (0..n * numel).map(|_| rng.gen::<f32>()).collect(),
        targets: (0..n)
            .map(|_| [rng.gen_range(-0.8..0.8), rng.gen_range(0.1..0.9)])
            .collect(),
    }
}

fn all_windows(n: usize, t: usize) -> Vec<Window> {
    let view = View {
        segments: vec![(0, 0..n)],
    };
    make_windows(&view, t, 1, None).unwrap().windows
}

fn small(name: &str, shape: [usize; 3]) -> Model {
    Model::build(&ArchitectureConfig::builtin(name, shape).unwrap(), 0).unwrap()
}

#[test]
fn overfits_thirty_two_samples() {
    let shape = [4, 24, 32];
    let data = synthetic(32, shape, 2);
    let windows = all_windows(32, 5);
    let mut model = small("cnn3d_modified", shape);
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 1e-3,
        early_stop_patience: 200,
        input_size: [32, 24],
        ..TrainConfig::default()
    };
    let r = fit(&mut model, &data, &windows, &windows, &cfg, None, &TrainingMetadata::default()).unwrap();
    assert_eq!(r.train_loss.len(), 200);
    let last = *r.train_loss.last().unwrap();
    assert!(last < 1e-3, "final train loss {last}");
    let smoothed: Vec<f64> = r.train_loss.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for w in smoothed.windows(2) {
        assert!(w[1] <= w[0], "smoothed loss rose: {smoothed:?}");
    }
}

#[test]
fn same_seed_gives_identical_curves_and_checkpoint() {
    let shape = [4, 24, 32];
    let data = synthetic(40, shape, 3);
    let windows = all_windows(40, 5);
    let (train, val) = windows.split_at(28);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        seed: 9,
        input_size: [32, 24],
        ..TrainConfig::default()
    };
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut model = small("rnn_modified", shape);
        let r = fit(&mut model, &data, train, val, &cfg, Some(dir.path()), &TrainingMetadata::default()).unwrap();
        let bytes = std::fs::read(dir.path().join(CHECKPOINT_FILE)).unwrap();
        (r, bytes)
    };
    let (a, ca) = run();
    let (b, cb) = run();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.train_loss), bits(&b.train_loss));
    assert_eq!(bits(&a.val_loss), bits(&b.val_loss));
    assert_eq!(ca, cb);
    let (m, meta) = decode_checkpoint(&ca).unwrap();
    assert_eq!(meta.epochs, a.best_epoch);
    assert_eq!(meta.final_val_loss, Some(a.best_val_loss));
    assert_eq!(m.config().name, "rnn_modified");
}

#[test]
fn every_builtin_gets_gradients_everywhere() {
    let shape = [4, 24, 32];
    let data = synthetic(12, shape, 4);
    let windows = all_windows(12, 5);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        input_size: [32, 24],
        ..TrainConfig::default()
    };
    for name in BUILTIN_NAMES {
        let mut model = small(name, shape);
        let r = fit(&mut model, &data, &windows, &windows, &cfg, None, &TrainingMetadata::default()).unwrap();
        assert!(r.gradient_coverage >= 0.99, "{name}: {}", r.gradient_coverage);
    }
}

#[test]
fn validation_leaves_batch_norm_statistics_alone() {
    let shape = [4, 24, 32];
    let data = synthetic(8, shape, 5);
    let windows = all_windows(8, 5);
    let mut model = small("cnn3d_modified", shape);
    let (x, _) = data.batch(&windows);
    let before = model.norms().to_vec();
    model.predict(&x).unwrap();
    assert_eq!(model.norms(), &before[..]);
    let mut tape = Tape::new();
    model.forward(&mut tape, &x, NormMode::Inference).unwrap();
    assert_eq!(model.norms(), &before[..]);
    model.forward(&mut Tape::new(), &x, NormMode::Training).unwrap();
    assert_ne!(model.norms(), &before[..]);
}

fn divergence(model: &mut Model, data: &PreparedData) -> (usize, usize, String) {
    let windows = all_windows(data.len(), 5);
    let cfg = TrainConfig {
        epochs: 1,
        input_size: [32, 24],
        ..TrainConfig::default()
    };
    match fit(model, data, &windows, &windows, &cfg, None, &TrainingMetadata::default()) {
        Err(TrainError::Diverged { epoch, batch, location }) => (epoch, batch, location),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn divergence_names_the_first_bad_layer() {
    let shape = [4, 24, 32];
    let data = synthetic(8, shape, 6);

    let mut model = small("cnn3d_modified", shape);
    let p = model.params_mut().iter_mut().find(|p| p.name == "1.residual_block.bn1.gamma").unwrap();
    p.value.data_mut()[0] = f32::NAN;
    let (epoch, batch, location) = divergence(&mut model, &data);
    assert_eq!((epoch, batch), (1, 0));
    assert!(location.starts_with("1.residual_block.bn1"), "{location}");

    let mut model = small("rnn_modified", shape);
    let p = model.params_mut().iter_mut().find(|p| p.name.ends_with("dense.w")).unwrap();
    p.value.data_mut()[5] = f32::INFINITY;
    let (_, _, location) = divergence(&mut model, &data);
    assert!(location.contains("dense"), "{location}");

    let mut bad = data.clone();
    bad.inputs[0] = f32::NAN;
    let (_, _, location) = divergence(&mut small("cnn3d_modified", shape), &bad);
    assert_eq!(location, "the input batch");
}

#[test]
fn mismatched_inputs_are_config_errors() {
    let data = synthetic(8, [4, 24, 32], 7);
    let windows = all_windows(8, 5);
    let mut model = small("cnn3d_modified", [3, 24, 32]);
    let cfg = TrainConfig::default();
    let r = fit(&mut model, &data, &windows, &windows, &cfg, None, &TrainingMetadata::default());
    assert!(matches!(r, Err(TrainError::Config(_))));
    assert!(matches!(
        fit(&mut model, &data, &[], &windows, &cfg, None, &TrainingMetadata::default()),
        Err(TrainError::Contract(_))
    ));
    let bad = TrainConfig {
        early_stop_patience: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
}

fn report(epochs: usize) -> TrainReport {
    TrainReport {
        train_loss: (0..epochs).map(|e| 0.5 / (e + 1) as f64 + 1e-9 * e as f64).collect(),
        val_loss: (0..epochs).map(|e| 0.7 / (e + 1) as f64 + 0.1234567891234).collect(),
        epoch_seconds: vec![1.0; epochs],
        best_epoch: epochs,
        best_val_loss: 0.3,
        overfit_ratio: 1.0,
        overfitting: false,
        stopped_early: false,
        gradient_coverage: 1.0,
        checkpoint: None,
    }
}

#[test]
fn curves_export_and_reimport() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(3);
    export_curves(&r, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next(), Some("epoch,train_loss,val_loss"));
    let rows = read_curves_csv(&dir.path().join("curves.csv")).unwrap();
    for (i, (e, t, v)) in rows.into_iter().enumerate() {
        assert_eq!(e, i + 1);
        assert_eq!(t.to_bits(), r.train_loss[i].to_bits());
        assert_eq!(v.to_bits(), r.val_loss[i].to_bits());
    }
    let svg = std::fs::read_to_string(dir.path().join("curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == 2);
}

#[test]
fn empty_report_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("curves");
    assert!(export_curves(&report(0), &target).is_err());
    assert!(!target.exists());
}

#[test]
fn trains_from_a_recorded_dataset() {
    use macpilot_dataset::{open_recording, Dataset, RecordingOptions};
    use macpilot_sim::{builtin_track, CameraConfig, ControlCommand, Simulator};
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let track = std::sync::Arc::new(builtin_track("oval").unwrap());
    let cam = CameraConfig::default();
    let mut sim = Simulator::new(track, cam, 0).unwrap();
    let mut s = open_recording(RecordingOptions::new("oval", cam), &out).unwrap();
    for k in 0..40 {
        let c = ControlCommand::new(0.2 * ((k as f32) * 0.3).sin(), 0.4);
        sim.tick(c);
        s.append(&sim.render(), c).unwrap();
    }
    s.finalize().unwrap();
    let ds = Dataset::open(&out).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let mut model = Model::build(&ArchitectureConfig::builtin("rnn_modified", cfg.input_shape()).unwrap(), 1).unwrap();
    let run = dir.path().join("run");
    let r = train(&mut model, &ds, &cfg, Some(&run)).unwrap();
    assert_eq!(r.train_loss.len(), 2);
    assert!(run.join(CHECKPOINT_FILE).exists());
    let (_, meta) = macpilot_core::zoo::load_checkpoint(&run.join(CHECKPOINT_FILE)).unwrap();
    assert!(meta.dataset_id.starts_with("oval:"));
    assert_eq!(meta.training["batch_size"], 8);

    let mut wrong = Model::build(&ArchitectureConfig::builtin("rnn_modified", [3, 48, 64]).unwrap(), 1).unwrap();
    assert!(matches!(train(&mut wrong, &ds, &cfg, None), Err(TrainError::Config(_))));
}
