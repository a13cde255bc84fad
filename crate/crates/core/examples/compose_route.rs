//! Minimum-energy routing on the demo network, before and after closing a segment.
//!
//! `cargo run -p skysim --example compose_route`

use skysim::composer::{compose_min_energy, CompositionQuery};
use skysim::synth::demo_network;

fn main() {
    let net = demo_network();
    let query = CompositionQuery::new(&net, "depot", "clinic", 1.5);
    show("all segments open", compose_min_energy(&net, &query));

    let mut closed = query.availability.clone();
    closed.insert("market-clinic".into(), false);
    show("market-clinic closed", compose_min_energy(&net, &query.clone().with_availability(closed.clone())));

    closed.insert("tower-clinic".into(), false);
    show("clinic cut off", compose_min_energy(&net, &query.with_availability(closed)));
}

fn show(label: &str, result: Result<skysim::ComposedPath, skysim::composer::ComposeError>) {
    match result {
        Ok(path) => {
            println!("{label}: {} ({:.3} Wh)", path.nodes().join(" -> "), path.total_energy_wh);
            for step in &path.steps {
                println!("    {:<14} {:>8.3} Wh", step.segment, step.energy_wh);
            }
        }
        Err(e) => println!("{label}: {e}"),
    }
}
