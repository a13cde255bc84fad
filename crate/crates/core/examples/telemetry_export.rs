//! Runs the demo network with a random workload and writes the three output
//! files a `skysim run` would produce.
//!
//! `cargo run -p skysim --example telemetry_export -- [OUT_DIR] [SEED]`

use std::path::PathBuf;

use skysim::engine::run_builtin;
use skysim::synth::{demo_network, random_scenario};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "skysim-out".into()));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));

    let net = demo_network();
    let scenario = random_scenario(seed, &net, 6, 2);
    let r = run_builtin(&net, &scenario, "greedy").expect("demo scenario is valid");

    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("frames.csv"), r.frames_csv())?;
    std::fs::write(out.join("events.csv"), r.events_csv())?;
    std::fs::write(out.join("summary.json"), r.summary_json())?;
    println!(
        "{} frames, {} events, {} of {} drones done -> {}",
        r.frames.len(),
        r.events.len(),
        r.summary.completed,
        r.summary.drones.len(),
        out.display()
    );
    Ok(())
}
