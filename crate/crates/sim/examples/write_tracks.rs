//! Regenerates the shipped track files: `cargo run -p macpilot-sim --example write_tracks`.

use macpilot_sim::trackgen;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tracks");
    for def in [
        trackgen::oval(),
        trackgen::mini_monaco(),
        trackgen::generated(trackgen::GENERATED_SEED),
    ] {
        let path = dir.join(format!("{}.json", def.id));
        std::fs::write(&path, serde_json::to_string_pretty(&def).unwrap() + "\n").unwrap();
        println!("{}: {} points", path.display(), def.centerline.len());
    }
}
