//! Builds a small network by hand, edits it, and prints the saved document.
//!
//! `cargo run -p skysim --example network_editing`

use skysim::model::ModelError;
use skysim::{load_network, save_network, Node, Point3, Segment, SimSettings, SkywayNetwork};

fn main() -> Result<(), ModelError> {
    let mut net = SkywayNetwork::new(SimSettings::default());
    net.add_node(Node::new("depot", Point3::new(0.0, 0.0, 20.0)).with_pads(2).with_charge_power(400.0))?;
    net.add_node(Node::new("roof", Point3::new(400.0, 150.0, 45.0)))?;
    net.add_node(Node::new("park", Point3::new(-200.0, 350.0, 15.0)))?;
    net.add_segment(Segment::new("depot-roof", "depot", "roof"))?;
    net.add_segment(
        Segment::new("depot-park", "depot", "park").with_waypoints(vec![Point3::new(-150.0, 100.0, 40.0)]),
    )?;

    // Edits are validated; a bad one leaves the network untouched.
    if let Err(e) = net.add_segment(Segment::new("loop", "roof", "roof")) {
        println!("rejected: {e}");
    }
    net.move_node("roof", Point3::new(420.0, 160.0, 50.0))?;
    net.set_segment_availability("depot-park", false)?;
    let removed = net.remove_node("park")?;
    println!("removed {} and its segments", removed.id);

    let bytes = save_network(&net);
    assert_eq!(load_network(&bytes)?, net);
    println!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}
