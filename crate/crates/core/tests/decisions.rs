//! Engine responses to specific controller answers, driven by a scripted controller.

use std::sync::{Arc, Mutex};

use skysim::energy::segment_energy;
use skysim::engine::{run, DeliveryRequest, FaultEvent, RunResult, Scenario};
use skysim::model::Direction;
use skysim::protocol::{Action, Arrival, Controller, Decision, InProcessLink, Message};
use skysim::synth::ring_network;
use skysim::telemetry::{DroneStatus, EventKind};
use skysim::{Node, Point3, Segment, SimSettings, SkywayNetwork};

type Script = Box<dyn FnMut(&Arrival, usize) -> Action + Send>;

/// Answers arrivals from a closure and records everything it was told.
struct Scripted {
    script: Script,
    asked: usize,
    log: Arc<Mutex<Vec<Message>>>,
}

impl Controller for Scripted {
    fn handle(&mut self, msg: &Message) -> Option<Message> {
        self.log.lock().unwrap().push(msg.clone());
        match msg {
            Message::Hello { protocol_version, .. } => Some(Message::Ready { protocol_version: *protocol_version }),
            Message::Arrival(a) => {
                self.asked += 1;
                let action = (self.script)(a, self.asked);
                Some(Message::Decision(Decision::answering(a, action)))
            }
            _ => None,
        }
    }
}

fn run_scripted(net: &SkywayNetwork, scenario: &Scenario, script: Script) -> (RunResult, Vec<Message>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let controller = Scripted { script, asked: 0, log: log.clone() };
    let result = run(net, scenario, Box::new(InProcessLink::new(controller))).unwrap();
    let log = log.lock().unwrap().clone();
    (result, log)
}

fn traverse(seg: &str) -> Action {
    Action::Traverse { segment: seg.into() }
}

fn rejections(log: &[Message]) -> Vec<String> {
    log.iter()
        .filter_map(|m| match m {
            Message::Rejection { reason, .. } => Some(reason.clone()),
            _ => None,
        })
        .collect()
}

fn s1_energy(net: &SkywayNetwork, payload: f64) -> f64 {
    let s = &net.settings;
    let seg = net.segment("s1").unwrap();
    segment_energy(&s.drone, &s.environment, &net.leg_profiles(seg, Direction::Forward), payload, s.hover_times()).unwrap()
}

/// Departure needs `soc >= E (1 + reserve)` with the default 10 % reserve.
#[test]
fn reserve_gate_boundary() {
    let probe = ring_network(6, 300.0, SimSettings::default());
    let e = s1_energy(&probe, 1.0);
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n2", 1.0)]);

    for (factor, departs) in [(1.08, false), (1.1, true)] {
        let mut settings = SimSettings::default();
        settings.drone.battery_capacity_wh = e * factor;
        let net = ring_network(6, 300.0, settings);
        let (r, log) = run_scripted(
            &net,
            &scenario,
            Box::new(|a, _| if a.node_id == "n2" { Action::Complete } else { traverse("s1") }),
        );
        let departed = r.events.iter().any(|e| e.kind == EventKind::NodeDepart);
        assert_eq!(departed, departs, "factor {factor}");
        if !departs {
            let why = rejections(&log);
            assert!(why[0].contains("needs"), "{why:?}");
            // Every exchange of the instant was rejected, so the drone is given up.
            assert_eq!(why.len(), 64);
            let d = &r.summary.drones[0];
            assert_eq!((d.status, d.failure_reason.as_deref()), (DroneStatus::Failed, Some("stalled")));
        }
    }
}

#[test]
fn charge_to_current_level_asks_again_at_once() {
    let net = ring_network(6, 300.0, SimSettings::default());
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n2", 0.0)]);
    let (r, log) = run_scripted(
        &net,
        &scenario,
        Box::new(|a, n| match (a.node_id.as_str(), n) {
            ("n1", 1) => Action::Charge { target_wh: a.soc_wh },
            ("n1", _) => traverse("s1"),
            _ => Action::Complete,
        }),
    );
    let times: Vec<f64> = log
        .iter()
        .filter_map(|m| match m {
            Message::Arrival(a) if a.node_id == "n1" => Some(a.time_s),
            _ => None,
        })
        .collect();
    assert_eq!(times, [0.0, 0.0]);
    assert!(rejections(&log).is_empty());
    assert!(!r.events.iter().any(|e| e.kind == EventKind::ChargeStart));
    assert_eq!(r.summary.completed, 1);
}

#[test]
fn cruise_crosses_a_waypoint() {
    let net = SkywayNetwork::from_parts(
        [Node::new("a", Point3::new(0.0, 0.0, 30.0)), Node::new("b", Point3::new(300.0, 400.0, 30.0))],
        [Segment::new("ab", "a", "b").with_waypoints(vec![Point3::new(300.0, 0.0, 30.0)])],
        SimSettings::default(),
    )
    .unwrap();
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "a", "b", 0.5)]);
    let (r, _) = run_scripted(
        &net,
        &scenario,
        Box::new(|a, _| if a.node_id == "b" { Action::Complete } else { traverse("ab") }),
    );
    let at = |kind: EventKind| r.events.iter().find(|e| e.kind == kind).unwrap().time_s;
    let (t0, t1) = (at(EventKind::SegmentStart), at(EventKind::SegmentEnd));
    // 300 m + 400 m at 10 m/s
    assert!((t1 - t0 - 70.0).abs() < 1e-9, "{}", t1 - t0);
    let frame = |t: f64| r.frames.iter().find(|f| (f.time_s - t).abs() < 1e-6).unwrap();
    let before = frame(t0 + 20.0);
    assert!((before.x_m - 200.0).abs() < 1e-6 && before.y_m.abs() < 1e-9);
    let after = frame(t0 + 35.0);
    assert!((after.x_m - 300.0).abs() < 1e-9 && (after.y_m - 50.0).abs() < 1e-6, "{after:?}");
}

#[test]
fn closing_the_segment_in_use_lets_the_flight_finish() {
    let net = ring_network(6, 300.0, SimSettings::default());
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n2", 1.0)])
        .with_faults(vec![FaultEvent { time_s: 20.0, segment: "s1".into(), available: false }]);
    let (r, log) = run_scripted(
        &net,
        &scenario,
        Box::new(|a, _| if a.node_id == "n2" { Action::Complete } else { traverse("s1") }),
    );
    assert!(log.iter().any(|m| matches!(m, Message::Fault { segment, available: false, .. } if segment == "s1")));
    let kinds: Vec<_> = r.events.iter().map(|e| (e.kind, e.location_id.as_str())).collect();
    assert!(kinds.contains(&(EventKind::SegmentEnd, "s1")), "{kinds:?}");
    assert_eq!(kinds.last(), Some(&(EventKind::Complete, "n2")));
}

#[test]
fn wait_zero_still_advances_time() {
    let net = ring_network(6, 300.0, SimSettings::default());
    let scenario = Scenario::new(vec![DeliveryRequest::new("r1", "n1", "n2", 0.0)]);
    let (_, log) = run_scripted(
        &net,
        &scenario,
        Box::new(|a, n| match (a.node_id.as_str(), n) {
            ("n1", 1) => Action::Wait { duration_s: 0.0 },
            ("n1", _) => traverse("s1"),
            _ => Action::Complete,
        }),
    );
    let n1: Vec<f64> = log
        .iter()
        .filter_map(|m| match m {
            Message::Arrival(a) if a.node_id == "n1" => Some(a.time_s),
            _ => None,
        })
        .collect();
    assert_eq!(n1.len(), 2);
    assert!((n1[1] - net.settings.dt_s).abs() < 1e-12, "{n1:?}");
}
