//! A segment closes while a drone is in the air; the greedy controller turns
//! it around the ring. The static planner, given the same fault, is stranded.
//!
//! `cargo run -p skysim --example ring_fault_recovery`

use skysim::engine::{run_builtin, DeliveryRequest, FaultEvent, Scenario};
use skysim::synth::ring_network;
use skysim::SimSettings;

fn main() {
    let net = ring_network(6, 300.0, SimSettings::default());
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n3", 1.0)])
        .with_faults(vec![FaultEvent { time_s: 20.0, segment: "s2".into(), available: false }]);

    for controller in ["greedy", "static"] {
        let r = run_builtin(&net, &scenario, controller).unwrap();
        println!("== {controller}");
        for e in &r.events {
            println!("{:>8.1}  {:<13} {}", e.time_s, e.kind.as_str(), e.location_id);
        }
        let d = &r.summary.drones[0];
        println!("-> {:?} {:?}, {:.3} Wh\n", d.status, d.failure_reason, d.energy_wh);
    }
}
