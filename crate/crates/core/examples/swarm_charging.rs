//! Three drones fly as a swarm through a hub with a single charging pad.
//! They charge one at a time and leave together.
//!
//! `cargo run -p skysim --example swarm_charging`

use skysim::engine::{run_builtin, DeliveryRequest, Scenario};
use skysim::telemetry::EventKind;
use skysim::{Node, Point3, Segment, SimSettings, SkywayNetwork};

fn main() {
    let mut settings = SimSettings::default();
    settings.drone.battery_capacity_wh = 6.0;
    let net = SkywayNetwork::from_parts(
        [
            Node::new("a", Point3::new(0.0, 0.0, 30.0)),
            Node::new("hub", Point3::new(300.0, 0.0, 30.0)).with_pads(1),
            Node::new("c", Point3::new(600.0, 0.0, 30.0)),
        ],
        [Segment::new("ab", "a", "hub"), Segment::new("bc", "hub", "c")],
        settings,
    )
    .unwrap();
    let scenario = Scenario::new(vec![DeliveryRequest::new("sw", "a", "c", 1.0).with_swarm(3)]);
    let r = run_builtin(&net, &scenario, "greedy").unwrap();

    let shown = [EventKind::ChargeStart, EventKind::ChargeEnd, EventKind::NodeDepart, EventKind::Complete];
    for e in r.events.iter().filter(|e| shown.contains(&e.kind)) {
        println!("{:>8.1}  {:<6} {:<12} {}", e.time_s, e.drone_id, e.kind.as_str(), e.location_id);
    }
    println!("{} completed, {:.3} Wh in total", r.summary.completed, r.summary.total_energy_wh);
}
