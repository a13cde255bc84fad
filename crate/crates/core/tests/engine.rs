use skysim::engine::{run_builtin, DeliveryRequest, FaultEvent, RunResult, Scenario};
use skysim::synth::ring_network;
use skysim::telemetry::{DroneStatus, EventKind};
use skysim::{Node, Point3, Segment, SimSettings, SkywayNetwork};

fn ring() -> SkywayNetwork {
    ring_network(6, 300.0, SimSettings::default())
}

fn route(result: &RunResult, drone: &str) -> Vec<String> {
    result
        .events
        .iter()
        .filter(|e| e.drone_id == drone && e.kind == EventKind::SegmentStart)
        .map(|e| e.location_id.clone())
        .collect()
}

fn one_request(faults: Vec<FaultEvent>) -> Scenario {
    Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n3", 1.0)]).with_faults(faults)
}

fn status(result: &RunResult, drone: &str) -> (DroneStatus, Option<String>) {
    let d = result.summary.drones.iter().find(|d| d.drone_id == drone).unwrap();
    (d.status, d.failure_reason.clone())
}

#[test]
fn ring_delivery_takes_the_short_way() {
    let r = run_builtin(&ring(), &one_request(vec![]), "greedy").unwrap();
    assert_eq!(route(&r, "r1"), ["s1", "s2"]);
    assert_eq!(status(&r, "r1"), (DroneStatus::Done, None));
    // 2 x (5 s takeoff + 30 s cruise + 10 s landing)
    assert!((r.summary.total_time_s - 90.0).abs() < 1e-9, "{}", r.summary.total_time_s);
    let kinds: Vec<_> = r.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.first(), Some(&EventKind::NodeArrive));
    assert_eq!(kinds.last(), Some(&EventKind::Complete));
}

#[test]
fn fault_in_flight_flips_direction() {
    let r = run_builtin(
        &ring(),
        &one_request(vec![FaultEvent { time_s: 20.0, segment: "s2".into(), available: false }]),
        "greedy",
    )
    .unwrap();
    assert_eq!(route(&r, "r1"), ["s1", "s1", "s6", "s5", "s4", "s3"]);
    assert_eq!(status(&r, "r1").0, DroneStatus::Done);
}

#[test]
fn fault_at_arrival_instant_is_seen_by_the_decision() {
    let r = run_builtin(
        &ring(),
        &one_request(vec![FaultEvent { time_s: 45.0, segment: "s2".into(), available: false }]),
        "greedy",
    )
    .unwrap();
    assert_eq!(route(&r, "r1")[1], "s1");
    assert_eq!(status(&r, "r1").0, DroneStatus::Done);
}

#[test]
fn cut_off_drone_is_stranded_not_crashed() {
    let faults = ["s2", "s6"]
        .map(|s| FaultEvent { time_s: 20.0, segment: s.into(), available: false })
        .to_vec();
    let r = run_builtin(&ring(), &one_request(faults), "greedy").unwrap();
    assert_eq!(status(&r, "r1"), (DroneStatus::Failed, Some("stranded".into())));
    let last = r.events.last().unwrap();
    assert_eq!((last.kind, last.location_id.as_str()), (EventKind::Failed, "n2"));
    // Holds start at the 45 s arrival and strand after the 300 s stall timeout.
    assert!((last.time_s - 345.0).abs() < 1e-9, "{}", last.time_s);
}

#[test]
fn restored_segment_unblocks_a_waiting_drone() {
    let faults = vec![
        FaultEvent { time_s: 20.0, segment: "s2".into(), available: false },
        FaultEvent { time_s: 20.0, segment: "s6".into(), available: false },
        FaultEvent { time_s: 100.0, segment: "s2".into(), available: true },
    ];
    let r = run_builtin(&ring(), &one_request(faults), "greedy").unwrap();
    assert_eq!(route(&r, "r1"), ["s1", "s2"]);
    assert_eq!(status(&r, "r1").0, DroneStatus::Done);
}

#[test]
fn static_plan_does_not_adapt() {
    let faults = vec![FaultEvent { time_s: 20.0, segment: "s2".into(), available: false }];
    let r = run_builtin(&ring(), &one_request(faults), "static").unwrap();
    assert_eq!(route(&r, "r1"), ["s1"]);
    assert_eq!(status(&r, "r1"), (DroneStatus::Failed, Some("stranded".into())));
}

#[test]
fn small_battery_charges_before_departing() {
    let mut net = ring();
    net.settings.drone.battery_capacity_wh = 6.0;
    let r = run_builtin(&net, &one_request(vec![]), "greedy").unwrap();
    assert_eq!(status(&r, "r1").0, DroneStatus::Done);
    let kinds: Vec<_> = r.events.iter().map(|e| e.kind).collect();
    assert!(kinds.contains(&EventKind::ChargeStart), "{kinds:?}");
    assert!(kinds.contains(&EventKind::ChargeEnd));
}

#[test]
fn late_release_and_timeout() {
    let mut s = one_request(vec![]);
    s.requests.push(DeliveryRequest::new("r2", "n4", "n1", 0.0).released_at(4000.0));
    s.max_time_s = 200.0;
    let r = run_builtin(&ring(), &s, "greedy").unwrap();
    assert_eq!(status(&r, "r1").0, DroneStatus::Done);
    assert_eq!(status(&r, "r2").0, DroneStatus::Unreleased);
    assert!((r.summary.total_time_s - 200.0).abs() < 1e-9);
}

#[test]
fn timeout_fails_airborne_drones() {
    let mut s = one_request(vec![]);
    s.max_time_s = 60.0;
    let r = run_builtin(&ring(), &s, "greedy").unwrap();
    assert_eq!(status(&r, "r1"), (DroneStatus::Failed, Some("timeout".into())));
}

#[test]
fn swarm_members_share_one_pad() {
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
    let s = Scenario::new(vec![DeliveryRequest::new("sw", "a", "c", 1.0).with_swarm(3)]);
    let r = run_builtin(&net, &s, "greedy").unwrap();
    for d in ["sw-1", "sw-2", "sw-3"] {
        assert_eq!(status(&r, d).0, DroneStatus::Done, "{d}");
    }
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for d in ["sw-1", "sw-2", "sw-3"] {
        let mut start = None;
        for e in r.events.iter().filter(|e| e.drone_id == d && e.location_id == "hub") {
            match e.kind {
                EventKind::ChargeStart => start = Some(e.time_s),
                EventKind::ChargeEnd => intervals.push((start.take().unwrap(), e.time_s)),
                _ => {}
            }
        }
    }
    assert_eq!(intervals.len(), 3, "{:?}", r.events);
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in intervals.windows(2) {
        assert!(w[0].1 <= w[1].0, "overlap {intervals:?}");
    }
    let departs: Vec<f64> = r
        .events
        .iter()
        .filter(|e| e.kind == EventKind::NodeDepart && e.location_id == "hub")
        .map(|e| e.time_s)
        .collect();
    assert_eq!(departs.len(), 3);
    assert!(departs.iter().all(|&t| t == departs[0]) && departs[0] >= intervals[2].1);
}

#[test]
fn rejects_bad_scenarios() {
    let s = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "nowhere", 1.0)]);
    let err = run_builtin(&ring(), &s, "greedy").unwrap_err();
    assert!(err.to_string().contains("nowhere"), "{err}");
}
