//! Per-frame drone records, trip milestones, and their CSV exports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub const FRAMES_HEADER: &str = "time_s,drone_id,swarm_id,x_m,y_m,z_m,phase,speed_mps,power_w,soc_wh,soc_pct,cum_energy_wh,node_id,segment_id,payload_kg";
pub const EVENTS_HEADER: &str = "time_s,drone_id,kind,location_id,duration_s";

/// Snapshot of one drone at one frame boundary.
///
/// `power_w` is the mean battery draw over the step that ended at `time_s`,
/// so summing `power_w * dt` over a drone's frames reproduces `cum_energy_wh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub time_s: f64,
    pub drone_id: String,
    pub swarm_id: Option<String>,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub phase: String,
    pub speed_mps: f64,
    pub power_w: f64,
    pub soc_wh: f64,
    pub soc_pct: f64,
    pub cum_energy_wh: f64,
    pub node_id: Option<String>,
    pub segment_id: Option<String>,
    pub payload_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    NodeArrive,
    NodeDepart,
    SegmentStart,
    SegmentEnd,
    ChargeStart,
    ChargeEnd,
    Complete,
    Failed,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::NodeArrive => "NodeArrive",
            EventKind::NodeDepart => "NodeDepart",
            EventKind::SegmentStart => "SegmentStart",
            EventKind::SegmentEnd => "SegmentEnd",
            EventKind::ChargeStart => "ChargeStart",
            EventKind::ChargeEnd => "ChargeEnd",
            EventKind::Complete => "Complete",
            EventKind::Failed => "Failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripEvent {
    pub time_s: f64,
    pub drone_id: String,
    pub kind: EventKind,
    /// Node or segment the milestone refers to.
    pub location_id: String,
}

/// Consumer of the engine's one-way telemetry stream.
pub trait TelemetrySink: Send {
    fn frame(&mut self, frame: &TelemetryFrame);
    fn event(&mut self, event: &TripEvent);
}

/// Collects everything it is sent.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub frames: Vec<TelemetryFrame>,
    pub events: Vec<TripEvent>,
}

impl TelemetrySink for Recorder {
    fn frame(&mut self, frame: &TelemetryFrame) {
        self.frames.push(frame.clone());
    }

    fn event(&mut self, event: &TripEvent) {
        self.events.push(event.clone());
    }
}

impl<S: TelemetrySink> TelemetrySink for Arc<Mutex<S>> {
    fn frame(&mut self, frame: &TelemetryFrame) {
        self.lock().expect("telemetry sink poisoned").frame(frame);
    }

    fn event(&mut self, event: &TripEvent) {
        self.lock().expect("telemetry sink poisoned").event(event);
    }
}

/// Discards everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl TelemetrySink for NullSink {
    fn frame(&mut self, _: &TelemetryFrame) {}
    fn event(&mut self, _: &TripEvent) {}
}

/// Sends to two sinks.
pub struct Tee<A, B>(pub A, pub B);

impl<A: TelemetrySink, B: TelemetrySink> TelemetrySink for Tee<A, B> {
    fn frame(&mut self, frame: &TelemetryFrame) {
        self.0.frame(frame);
        self.1.frame(frame);
    }

    fn event(&mut self, event: &TripEvent) {
        self.0.event(event);
        self.1.event(event);
    }
}

/// Fixed six-decimal notation; negative zero prints as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn by_time_then_drone<T>(items: &[T], key: impl Fn(&T) -> (f64, &str)) -> Vec<&T> {
    let mut sorted: Vec<&T> = items.iter().collect();
    sorted.sort_by(|a, b| {
        let (ta, da) = key(a);
        let (tb, db) = key(b);
        ta.total_cmp(&tb).then_with(|| da.cmp(db))
    });
    sorted
}

pub fn export_frames_csv(frames: &[TelemetryFrame]) -> Vec<u8> {
    let mut out = String::with_capacity(128 * (frames.len() + 1));
    out.push_str(FRAMES_HEADER);
    out.push('\n');
    for f in by_time_then_drone(frames, |f| (f.time_s, f.drone_id.as_str())) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt6(f.time_s),
            f.drone_id,
            f.swarm_id.as_deref().unwrap_or(""),
            fmt6(f.x_m),
            fmt6(f.y_m),
            fmt6(f.z_m),
            f.phase,
            fmt6(f.speed_mps),
            fmt6(f.power_w),
            fmt6(f.soc_wh),
            fmt6(f.soc_pct),
            fmt6(f.cum_energy_wh),
            f.node_id.as_deref().unwrap_or(""),
            f.segment_id.as_deref().unwrap_or(""),
            fmt6(f.payload_kg),
        );
    }
    out.into_bytes()
}

/// Event rows with derived durations: node dwell on `NodeDepart`, travel time
/// on `SegmentEnd`, charge time on `ChargeEnd`. Other rows leave it blank.
pub fn export_events_csv(events: &[TripEvent]) -> Vec<u8> {
    let mut out = String::with_capacity(64 * (events.len() + 1));
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    let mut opened: HashMap<(&str, EventKind), f64> = HashMap::new();
    for e in by_time_then_drone(events, |e| (e.time_s, e.drone_id.as_str())) {
        let opener = match e.kind {
            EventKind::NodeDepart => Some(EventKind::NodeArrive),
            EventKind::SegmentEnd => Some(EventKind::SegmentStart),
            EventKind::ChargeEnd => Some(EventKind::ChargeStart),
            _ => None,
        };
        let duration = opener
            .and_then(|k| opened.remove(&(e.drone_id.as_str(), k)))
            .map(|start| fmt6(e.time_s - start))
            .unwrap_or_default();
        if matches!(
            e.kind,
            EventKind::NodeArrive | EventKind::SegmentStart | EventKind::ChargeStart
        ) {
            opened.insert((e.drone_id.as_str(), e.kind), e.time_s);
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt6(e.time_s),
            e.drone_id,
            e.kind.as_str(),
            e.location_id,
            duration
        );
    }
    out.into_bytes()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroneStatus {
    Done,
    Failed,
    /// Still flying or at a node when the run stopped.
    Active,
    /// Release time was never reached.
    Unreleased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSummary {
    pub drone_id: String,
    pub request_id: String,
    pub swarm_id: Option<String>,
    pub status: DroneStatus,
    pub failure_reason: Option<String>,
    pub end_time_s: Option<f64>,
    pub energy_wh: f64,
    pub final_soc_wh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_time_s: f64,
    pub dt_s: f64,
    pub seed: u64,
    pub frame_count: usize,
    pub event_count: usize,
    pub completed: usize,
    pub failed: usize,
    pub total_energy_wh: f64,
    pub drones: Vec<DroneSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("summary is serializable");
        out.push(b'\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: f64, drone: &str, kind: EventKind, loc: &str) -> TripEvent {
        TripEvent {
            time_s: t,
            drone_id: drone.into(),
            kind,
            location_id: loc.into(),
        }
    }

    #[test]
    fn empty_exports_are_header_only() {
        assert_eq!(export_frames_csv(&[]), format!("{FRAMES_HEADER}\n").into_bytes());
        assert_eq!(export_events_csv(&[]), format!("{EVENTS_HEADER}\n").into_bytes());
    }

    #[test]
    fn durations_are_derived_per_drone() {
        let events = vec![
            ev(0.0, "b", EventKind::NodeArrive, "n1"),
            ev(0.0, "a", EventKind::NodeArrive, "n1"),
            ev(0.0, "a", EventKind::NodeDepart, "n1"),
            ev(0.0, "a", EventKind::SegmentStart, "s1"),
            ev(2.5, "b", EventKind::NodeDepart, "n1"),
            ev(10.0, "a", EventKind::SegmentEnd, "s1"),
        ];
        let csv = String::from_utf8(export_events_csv(&events)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "0.000000,a,NodeArrive,n1,");
        assert_eq!(lines[2], "0.000000,a,NodeDepart,n1,0.000000");
        assert_eq!(lines[4], "0.000000,b,NodeArrive,n1,");
        assert_eq!(lines[5], "2.500000,b,NodeDepart,n1,2.500000");
        assert_eq!(lines[6], "10.000000,a,SegmentEnd,s1,10.000000");
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(fmt6(-0.0), "0.000000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(1.5), "1.500000");
    }
}
