#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use skysim::energy::segment_energy;
use skysim::engine::RunResult;
use skysim::telemetry::{EventKind, TelemetryFrame};
use skysim::SkywayNetwork;

/// Checks every run-level invariant and returns the violations found.
pub fn audit(net: &SkywayNetwork, r: &RunResult) -> Vec<String> {
    let mut out = Vec::new();
    let s = &net.settings;
    let dt = s.dt_s;
    let cap = s.drone.battery_capacity_wh;

    let mut by_drone: BTreeMap<&str, Vec<&TelemetryFrame>> = BTreeMap::new();
    let mut charging: HashMap<(u64, &str), u32> = HashMap::new();
    for f in &r.frames {
        let k = (f.time_s / dt).round();
        if k * dt != f.time_s {
            out.push(format!("frame time {} is not a multiple of dt", f.time_s));
        }
        if !(0.0..=cap).contains(&f.soc_wh) {
            out.push(format!("{} soc {} outside [0, {cap}] at {}", f.drone_id, f.soc_wh, f.time_s));
        }
        if (f.soc_pct - 100.0 * f.soc_wh / cap).abs() > 1e-9 {
            out.push(format!("{} soc_pct mismatch at {}", f.drone_id, f.time_s));
        }
        let terminal = f.phase == "Done" || f.phase == "Failed";
        if !terminal && f.node_id.is_some() == f.segment_id.is_some() {
            out.push(format!("{} has node/segment context {:?}/{:?}", f.drone_id, f.node_id, f.segment_id));
        }
        if f.phase == "Charging" {
            *charging.entry((k as u64, f.node_id.as_deref().unwrap_or(""))).or_default() += 1;
        }
        by_drone.entry(&f.drone_id).or_default().push(f);
    }
    for ((tick, node), n) in charging {
        let pads = net.node(node).map_or(0, |n| n.pad_count);
        if n > pads {
            out.push(format!("{n} drones charging on {pads} pads at {node}, tick {tick}"));
        }
    }

    for (drone, frames) in &by_drone {
        let integrated: f64 = frames.iter().map(|f| f.power_w * dt / 3600.0).sum();
        let last = frames.last().unwrap();
        if (integrated - last.cum_energy_wh).abs() > 1e-6 {
            out.push(format!("{drone}: integrated {integrated} Wh vs cum {}", last.cum_energy_wh));
        }
        for w in frames.windows(2) {
            if w[1].cum_energy_wh < w[0].cum_energy_wh {
                out.push(format!("{drone}: cumulative energy decreased at {}", w[1].time_s));
            }
            if (w[1].time_s - w[0].time_s - dt).abs() > 1e-9 {
                out.push(format!("{drone}: frame gap at {}", w[1].time_s));
            }
        }
    }

    let mut open: HashMap<&str, (&str, f64)> = HashMap::new();
    let mut departed: HashMap<&str, (&str, f64)> = HashMap::new();
    let mut last_time: HashMap<&str, f64> = HashMap::new();
    for e in &r.events {
        let d = e.drone_id.as_str();
        if last_time.get(d).is_some_and(|&t| t > e.time_s) {
            out.push(format!("{d}: events out of order at {}", e.time_s));
        }
        last_time.insert(d, e.time_s);
        let k = (e.time_s / dt).round();
        if k * dt != e.time_s {
            out.push(format!("event time {} off the frame grid", e.time_s));
        }
        match e.kind {
            EventKind::NodeDepart => {
                departed.insert(d, (e.location_id.as_str(), e.time_s));
            }
            EventKind::SegmentStart => {
                if open.insert(d, (e.location_id.as_str(), e.time_s)).is_some() {
                    out.push(format!("{d}: nested SegmentStart at {}", e.time_s));
                }
                let Some((node, t)) = departed.remove(d) else {
                    out.push(format!("{d}: SegmentStart without departure"));
                    continue;
                };
                out.extend(check_departure(net, r, d, node, &e.location_id, t));
            }
            EventKind::SegmentEnd => match open.remove(d) {
                Some((seg, t0)) if seg == e.location_id => {
                    let seg = net.segment(seg).unwrap();
                    let expect = net.segment_length(seg) / s.drone.cruise_speed_mps;
                    let travel = e.time_s - t0;
                    if (travel - expect).abs() > dt + 1e-9 {
                        out.push(format!("{d}: travel {travel} s on {} vs {expect}", seg.id));
                    }
                    if let Some(frames) = by_drone.get(d) {
                        let times: Vec<f64> = frames
                            .iter()
                            .filter(|f| f.time_s > t0 - 1e-9 && f.time_s <= e.time_s + 1e-9)
                            .filter(|f| f.segment_id.as_deref() == Some(seg.id.as_str()))
                            .map(|f| f.time_s)
                            .collect();
                        if let (Some(a), Some(b)) = (times.first(), times.last()) {
                            if ((b - a) - travel).abs() > dt + 1e-9 {
                                out.push(format!("{d}: frames span {} vs travel {travel}", b - a));
                            }
                        }
                    }
                }
                other => out.push(format!("{d}: SegmentEnd {} does not close {other:?}", e.location_id)),
            },
            EventKind::Failed => {
                open.remove(d);
            }
            _ => {}
        }
    }
    for (d, (seg, _)) in open {
        let active = r.summary.drones.iter().any(|x| x.drone_id == d && x.end_time_s.is_none());
        if !active {
            out.push(format!("{d}: segment {seg} never closed"));
        }
    }
    out
}

/// The reserve gate, re-evaluated from the frame recorded at the departure instant.
fn check_departure(
    net: &SkywayNetwork,
    r: &RunResult,
    drone: &str,
    node: &str,
    segment: &str,
    time_s: f64,
) -> Vec<String> {
    let s = &net.settings;
    let seg = net.segment(segment).unwrap();
    let Some(dir) = seg.direction_from(node) else {
        return vec![format!("{drone}: departed {node} on non-incident {segment}")];
    };
    let Some(frame) = r.frames.iter().find(|f| f.drone_id == drone && f.time_s == time_s) else {
        return vec![format!("{drone}: no frame at departure {time_s}")];
    };
    let legs = net.leg_profiles(seg, dir);
    let e = segment_energy(&s.drone, &s.environment, &legs, frame.payload_kg, s.hover_times()).unwrap();
    let need = e * (1.0 + s.reserve_fraction);
    let soc = frame.soc_wh;
    if soc < need - 1e-9 {
        vec![format!("{drone}: left {node} on {segment} with {soc} Wh, needs {need}")]
    } else {
        vec![]
    }
}
