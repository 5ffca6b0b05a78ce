use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use macpilot_core::zoo::{decode_checkpoint, ArchitectureConfig, Model, BUILTIN_NAMES};
use macpilot_dataset::{inspect, recover};
use macpilot_eval::{
    ablation_run, check_compatible, compare, record_demonstration, render_table, run_laps, DemoOptions,
    EvalOptions, LapReport, ModelPolicy,
};
use macpilot_gateway::{serve, ClientMessage, GatewayConfig, ServerMessage, SessionConfig};
use macpilot_train::{export_curves, train, CHECKPOINT_FILE};
use serde_json::{json, Value};

use crate::error::{usage, CliError, Result};
use crate::manifest::{announce, RunManifest};
use crate::setup::{fresh_dir, load_track, open_dataset, resolve_seed, training_config};
use crate::{Cli, Command, ServeArgs};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Record { serve, out, seed } => record(serve, out, resolve_seed(seed.seed, None)),
        Command::Demo {
            track,
            out,
            laps,
            noise,
            seed,
        } => demo(&track, &out, laps, noise, resolve_seed(seed.seed, None)),
        Command::Train {
            dataset,
            arch,
            config,
            epochs,
            learning_rate,
            batch_size,
            seed,
            out,
        } => {
            let flags = [
                ("epochs", epochs.map(Value::from)),
                ("learning_rate", learning_rate.map(Value::from)),
                ("batch_size", batch_size.map(Value::from)),
                ("seed", seed.seed.map(Value::from)),
            ];
            cmd_train(&dataset, &arch, config.as_ref(), &flags, &out)
        }
        Command::Evaluate {
            checkpoint,
            track,
            laps,
            seed,
            out,
        } => evaluate(&checkpoint, &track, laps, resolve_seed(seed.seed, None), out.as_deref()),
        Command::Ablate {
            dataset,
            track,
            config,
            epochs,
            laps,
            seed,
            out,
        } => {
            let flags = [("epochs", epochs.map(Value::from)), ("seed", seed.seed.map(Value::from))];
            ablate(&dataset, &track, config.as_ref(), &flags, laps, &out)
        }
        Command::Inspect { dataset, verify } => cmd_inspect(&dataset, verify),
        Command::Recover { dataset } => cmd_recover(&dataset),
        Command::Serve { serve, data_dir, seed } => {
            std::fs::create_dir_all(&data_dir)?;
            live(serve, data_dir, resolve_seed(seed.seed, None), None)
        }
    }
}

fn record(args: ServeArgs, out: PathBuf, seed: u64) -> Result<()> {
    let name = out
        .file_name()
        .ok_or_else(|| usage(format!("--out {} needs a final path component", out.display())))?
        .to_string_lossy()
        .into_owned();
    if out.exists() {
        return Err(usage(format!("{} already exists", out.display())));
    }
    let root = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&root)?;
    live(args, root, seed, Some(name))
}

fn live(args: ServeArgs, data_root: PathBuf, seed: u64, record_to: Option<String>) -> Result<()> {
    let track = load_track(&args.track)?;
    let mut session = SessionConfig::new(track, &data_root);
    session.seed = seed;
    let mut cfg = GatewayConfig::new(session);
    cfg.tick_rate = args.tick_rate;
    cfg.static_dir = args.static_dir.clone();
    let command = if record_to.is_some() { "record" } else { "serve" };
    announce(
        command,
        seed,
        &json!({
            "track": args.track,
            "tick_rate": args.tick_rate,
            "data_dir": data_root,
            "static_dir": args.static_dir,
        }),
    );
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let gw = serve(cfg, SocketAddr::new(args.host, args.port)).await?;
        let addr = gw.local_addr();
        if let Some(name) = &record_to {
            let msg = ClientMessage::StartRecording {
                seq: None,
                out_path: name.clone(),
            };
            if let ServerMessage::Nack { reason, .. } = gw.request(&msg).await? {
                let _ = gw.shutdown().await;
                return Err(usage(format!("cannot record to {name}: {reason}")));
            }
            println!("recording to {}", data_root.join(name).display());
        }
        println!("listening on http://{addr}/ (WebSocket at ws://{addr}/ws); Ctrl-C stops");
        std::io::stdout().flush()?;
        tokio::signal::ctrl_c().await?;
        println!("shutting down");
        if let Some(m) = gw.shutdown().await? {
            println!("finalized {} samples in {} episodes", m.sample_count, m.episodes.len());
        }
        Ok::<(), CliError>(())
    })
}

fn demo(track: &str, out: &Path, laps: usize, noise: f32, seed: u64) -> Result<()> {
    let track = load_track(track)?;
    if out.exists() {
        return Err(usage(format!("{} already exists", out.display())));
    }
    let opts = DemoOptions {
        laps,
        seed,
        noise,
        ..DemoOptions::default()
    };
    let config = json!({"track": track.id(), "laps": laps, "noise": noise, "throttle": opts.oracle.throttle});
    announce("demo", seed, &config);
    let m = record_demonstration(track, &opts, out)?;
    let mut run = RunManifest::new("demo", seed, config);
    run.outputs.push(out.to_path_buf());
    run.write(out)?;
    println!("recorded {} samples in {} episodes to {}", m.sample_count, m.episodes.len(), out.display());
    Ok(())
}

fn cmd_train(
    dataset: &Path,
    arch: &str,
    config: Option<&PathBuf>,
    flags: &[(&str, Option<Value>)],
    out: &Path,
) -> Result<()> {
    let ds = open_dataset(dataset)?;
    let cfg = training_config(config, flags)?;
    let arch_cfg = ArchitectureConfig::builtin(arch, cfg.input_shape()).map_err(|_| {
        usage(format!("unknown architecture {arch:?}; built-ins: {}", BUILTIN_NAMES.join(", ")))
    })?;
    let cfg_json = serde_json::to_value(&cfg).expect("config serializes");
    announce("train", cfg.seed, &json!({"arch": arch, "training": cfg_json}));
    fresh_dir(out)?;
    let mut model = Model::build(&arch_cfg, cfg.seed).map_err(|e| CliError::Runtime(e.into()))?;
    let report = train(&mut model, &ds, &cfg, Some(out))?;
    export_curves(&report, out)?;
    std::fs::write(
        out.join("train_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    let mut run = RunManifest::new("train", cfg.seed, json!({"arch": arch, "training": cfg_json}));
    run.input(&dataset.join("manifest.json"))?;
    for f in [CHECKPOINT_FILE, "curves.csv", "curves.svg", "train_report.json"] {
        run.outputs.push(out.join(f));
    }
    run.write(out)?;
    println!(
        "best epoch {} of {}: validation loss {:.6}{}",
        report.best_epoch,
        report.val_loss.len(),
        report.best_val_loss,
        if report.overfitting { " (overfitting)" } else { "" }
    );
    println!("checkpoint {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn evaluate(checkpoints: &[PathBuf], tracks: &[String], laps: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    if laps == 0 {
        return Err(usage("--laps must be at least 1"));
    }
    let tracks = tracks.iter().map(|t| load_track(t)).collect::<Result<Vec<_>>>()?;
    let opts = EvalOptions::default();
    let mut models = Vec::new();
    for path in checkpoints {
        let bytes = std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let (model, _) = decode_checkpoint(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        check_compatible(&model, &opts.camera).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        models.push(model);
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    for m in &models {
        *seen.entry(m.config().name.clone()).or_default() += 1;
    }
    let labels: Vec<String> = models
        .iter()
        .zip(checkpoints)
        .map(|(m, p)| {
            let name = &m.config().name;
            if seen[name] > 1 {
                format!("{name} ({})", p.display())
            } else {
                name.clone()
            }
        })
        .collect();
    let config = json!({
        "checkpoints": checkpoints,
        "tracks": tracks.iter().map(|t| t.id()).collect::<Vec<_>>(),
        "laps": laps,
    });
    announce("evaluate", seed, &config);

    let mut reports: Vec<LapReport> = Vec::new();
    for (model, label) in models.into_iter().zip(&labels) {
        for track in &tracks {
            log::info!("evaluating {label} on {} for {laps} laps", track.id());
            let mut policy = ModelPolicy::new(model.clone(), &opts.camera)?;
            reports.push(run_laps(&mut policy, label, track.clone(), laps, seed, &opts)?);
        }
    }
    let table = render_table(&compare(&reports));
    print!("{}", table.text);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut run = RunManifest::new("evaluate", seed, config);
        for p in checkpoints {
            run.input(p)?;
        }
        for (i, r) in reports.iter().enumerate() {
            let f = dir.join(format!("report_{i:02}.json"));
            std::fs::write(&f, r.to_json() + "\n")?;
            run.outputs.push(f);
        }
        std::fs::write(dir.join("table.txt"), &table.text)?;
        std::fs::write(dir.join("table.csv"), &table.csv)?;
        run.outputs.extend([dir.join("table.txt"), dir.join("table.csv")]);
        run.write(dir)?;
    }
    Ok(())
}

fn ablate(
    dataset: &Path,
    track: &str,
    config: Option<&PathBuf>,
    flags: &[(&str, Option<Value>)],
    laps: usize,
    out: &Path,
) -> Result<()> {
    if laps == 0 {
        return Err(usage("--laps must be at least 1"));
    }
    let ds = open_dataset(dataset)?;
    let track = load_track(track)?;
    let cfg = training_config(config, flags)?;
    let cfg_json = json!({"training": cfg, "track": track.id(), "laps": laps});
    announce("ablate", cfg.seed, &cfg_json);
    fresh_dir(out)?;
    let result = ablation_run(&cfg, &ds, track, laps, cfg.seed, &EvalOptions::default(), out)?;
    let table = render_table(&result.table);
    print!("{}", table.text);
    std::fs::write(out.join("table.txt"), &table.text)?;
    std::fs::write(out.join("table.csv"), &table.csv)?;
    let variants: Vec<Value> = result
        .variants
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "parameters": v.parameter_count,
                "checkpoint": v.checkpoint,
                "metadata": v.metadata,
                "best_epoch": v.training.best_epoch,
                "overfitting": v.training.overfitting,
            })
        })
        .collect();
    std::fs::write(
        out.join("ablation.json"),
        serde_json::to_string_pretty(&json!({"variants": variants, "reports": result.reports})).unwrap() + "\n",
    )?;
    let mut run = RunManifest::new("ablate", cfg.seed, cfg_json);
    run.input(&dataset.join("manifest.json"))?;
    run.outputs.extend(["table.txt", "table.csv", "ablation.json"].map(|f| out.join(f)));
    run.outputs.extend(result.variants.iter().map(|v| v.checkpoint.clone()));
    run.write(out)?;
    Ok(())
}

fn cmd_inspect(dataset: &Path, verify: bool) -> Result<()> {
    let partial = dataset.with_file_name(format!(
        "{}.partial",
        dataset.file_name().unwrap_or_default().to_string_lossy()
    ));
    if !dataset.exists() && partial.is_dir() {
        return Err(usage(format!(
            "{} was interrupted; run `macpilot recover {}` first",
            dataset.display(),
            dataset.display()
        )));
    }
    let ds = open_dataset(dataset)?;
    print!("{}", inspect(&ds).render());
    if verify {
        ds.verify().map_err(|e| CliError::Runtime(e.into()))?;
        println!("all {} frames verified", ds.len());
    }
    Ok(())
}

fn cmd_recover(dataset: &Path) -> Result<()> {
    let m = recover(dataset).map_err(|e| usage(e.to_string()))?;
    println!(
        "recovered {} samples in {} episodes to {}",
        m.sample_count,
        m.episodes.len(),
        dataset.display()
    );
    Ok(())
}
