//! Drives a simulation one step at a time and injects a fault from outside,
//! the way an interactive front end would.
//!
//! `cargo run -p skysim --example stepping`

use skysim::engine::{DeliveryRequest, Scenario, Simulation};
use skysim::protocol::InProcessLink;
use skysim::synth::ring_network;
use skysim::telemetry::NullSink;
use skysim::{GreedyController, SimSettings};

fn main() {
    let net = ring_network(6, 300.0, SimSettings::default());
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n4", 0.5)]);
    let link = Box::new(InProcessLink::new(GreedyController::greedy()));
    let mut sim = Simulation::new(net, scenario, link, Box::new(NullSink)).unwrap();
    sim.start().unwrap();

    let mut closed = false;
    while sim.step().unwrap() {
        let t = sim.clock().now_s();
        if !closed && t >= 30.0 {
            sim.inject_fault("s3", false).unwrap();
            closed = true;
            println!("t={t:.1}s  closed s3");
        }
        if sim.clock().tick().is_multiple_of(150) {
            for d in sim.drones() {
                let p = d.position;
                println!(
                    "t={t:>6.1}s  {} {:<10} at ({:>7.1}, {:>7.1}, {:>5.1})  {:.2} Wh",
                    d.id,
                    d.phase.label(),
                    p.x(),
                    p.y(),
                    p.z(),
                    d.battery.soc_wh
                );
            }
        }
    }
    let summary = sim.finish().unwrap();
    println!("finished at {:.1} s, {} completed", summary.total_time_s, summary.completed);
}
