//! Seeded generators for fixture networks and scenarios.
//!
//! The same seed always yields the same network, so generated cases can be
//! named by their seed in test failures and examples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{DeliveryRequest, FaultEvent, Scenario};
use crate::model::{Node, Point3, Segment, SimSettings, SkywayNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds for [`random_network`].
#[derive(Debug, Clone)]
pub struct NetworkShape {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_segments: usize,
    /// Side of the square the nodes are scattered over, metres.
    pub extent_m: f64,
    pub max_altitude_m: f64,
    /// Probability that a segment starts unavailable.
    pub unavailable_p: f64,
    /// Probability that a segment gets one or two intermediate waypoints.
    pub waypoint_p: f64,
    /// Start with a spanning tree so every node is reachable (ignoring availability).
    pub connected: bool,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            max_nodes: 8,
            max_segments: 12,
            extent_m: 1500.0,
            max_altitude_m: 60.0,
            unavailable_p: 0.2,
            waypoint_p: 0.3,
            connected: false,
        }
    }
}

fn node_id(i: usize) -> String {
    format!("n{}", i + 1)
}

/// A random valid network with nodes `n1..` and segments `s1..`.
pub fn random_network(seed: u64, shape: &NetworkShape, settings: SimSettings) -> SkywayNetwork {
    let mut r = rng(seed);
    let n = r.random_range(shape.min_nodes..=shape.max_nodes.max(shape.min_nodes));
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let p = Point3::new(
                r.random_range(0.0..shape.extent_m),
                r.random_range(0.0..shape.extent_m),
                r.random_range(0.0..shape.max_altitude_m),
            );
            Node::new(node_id(i), p)
                .with_pads(r.random_range(1..=3))
                .with_charge_power(r.random_range(100.0..400.0))
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if shape.connected {
        for i in 1..n {
            pairs.push((r.random_range(0..i), i));
        }
    }
    let mut all: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|p| !pairs.contains(p))
        .collect();
    all.shuffle(&mut r);
    let extra = r.random_range(0..=shape.max_segments.saturating_sub(pairs.len()));
    pairs.extend(all.into_iter().take(extra));
    pairs.truncate(shape.max_segments);

    let segments: Vec<Segment> = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let (a, b) = if r.random_bool(0.5) { (a, b) } else { (b, a) };
            let mut seg = Segment::new(format!("s{}", k + 1), node_id(a), node_id(b));
            if r.random_bool(shape.waypoint_p) {
                let (pa, pb) = (nodes[a].position, nodes[b].position);
                let count = r.random_range(1..=2);
                let waypoints = (1..=count)
                    .map(|j| {
                        let base = pa.lerp(&pb, j as f64 / (count + 1) as f64);
                        Point3::new(
                            base.x() + r.random_range(-100.0..100.0),
                            base.y() + r.random_range(-100.0..100.0),
                            r.random_range(10.0..shape.max_altitude_m + 60.0),
                        )
                    })
                    .collect();
                seg = seg.with_waypoints(waypoints);
            }
            seg.available = !r.random_bool(shape.unavailable_p);
            seg
        })
        .collect();

    SkywayNetwork::from_parts(nodes, segments, settings).expect("generator emits valid networks")
}

/// `count` nodes evenly spaced on a circle, joined `n1 -> n2 -> ... -> n1` by segments `s1..`.
pub fn ring_network(count: usize, radius_m: f64, settings: SimSettings) -> SkywayNetwork {
    assert!(count >= 3, "a ring needs at least three nodes");
    let nodes: Vec<Node> = (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64;
            Node::new(node_id(i), Point3::new(radius_m * a.cos(), radius_m * a.sin(), 30.0))
        })
        .collect();
    let segments = (0..count).map(|i| {
        Segment::new(format!("s{}", i + 1), node_id(i), node_id((i + 1) % count))
    });
    SkywayNetwork::from_parts(nodes, segments, settings).expect("ring is valid")
}

/// A small city-like network with altitude changes, waypoints, and a 1-pad hub.
pub fn demo_network() -> SkywayNetwork {
    let nodes = [
        Node::new("depot", Point3::new(0.0, 0.0, 20.0)).with_pads(4).with_charge_power(400.0),
        Node::new("hub", Point3::new(600.0, 100.0, 45.0)).with_pads(1).with_charge_power(300.0),
        Node::new("tower", Point3::new(1100.0, 500.0, 90.0)),
        Node::new("market", Point3::new(500.0, 800.0, 15.0)).with_pads(2),
        Node::new("clinic", Point3::new(1400.0, 1000.0, 35.0)).with_pads(2),
    ];
    let segments = [
        Segment::new("depot-hub", "depot", "hub"),
        Segment::new("hub-tower", "hub", "tower")
            .with_waypoints(vec![Point3::new(850.0, 250.0, 110.0)]),
        Segment::new("depot-market", "depot", "market"),
        Segment::new("market-tower", "market", "tower"),
        Segment::new("tower-clinic", "tower", "clinic"),
        Segment::new("market-clinic", "market", "clinic").with_waypoints(vec![
            Point3::new(800.0, 950.0, 60.0),
            Point3::new(1100.0, 1050.0, 60.0),
        ]),
        Segment::new("hub-market", "hub", "market"),
    ];
    SkywayNetwork::from_parts(nodes, segments, SimSettings::default()).expect("demo is valid")
}

/// Random requests (and optionally faults) over `net`, seeded by `seed`.
pub fn random_scenario(seed: u64, net: &SkywayNetwork, requests: usize, faults: usize) -> Scenario {
    let mut r = rng(seed ^ 0x5ca1_ab1e);
    let ids: Vec<&str> = net.nodes().map(|n| n.id.as_str()).collect();
    let segs: Vec<&str> = net.segments().map(|s| s.id.as_str()).collect();
    let cap = net.settings.drone.payload_capacity_kg;
    let mut reqs = Vec::new();
    if ids.len() >= 2 {
        for k in 0..requests {
            let mut pick = ids.clone();
            pick.shuffle(&mut r);
            let size = if r.random_bool(0.25) { r.random_range(2..=3) } else { 1 };
            reqs.push(
                DeliveryRequest::new(format!("r{}", k + 1), pick[0], pick[1], r.random_range(0.0..=cap))
                    .with_swarm(size)
                    .released_at((r.random_range(0..60) as f64) * 5.0),
            );
        }
    }
    let mut fault_list = Vec::new();
    if !segs.is_empty() {
        for _ in 0..faults {
            fault_list.push(FaultEvent {
                time_s: r.random_range(0..240) as f64 * 2.5,
                segment: segs[r.random_range(0..segs.len())].to_string(),
                available: r.random_bool(0.4),
            });
        }
    }
    Scenario {
        requests: reqs,
        faults: fault_list,
        max_time_s: 1800.0,
        seed,
        stall_timeout_s: 120.0,
    }
}
