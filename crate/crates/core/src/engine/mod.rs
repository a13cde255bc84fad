//! Fixed-step simulation of drones and swarms on a skyway network.
//!
//! Each step moves airborne drones along their polylines (carrying leftover
//! step time across leg and phase boundaries), draws battery energy, charges
//! drones on pads, hands freed pads to the FIFO queue, fires faults, and then
//! asks the controller for a decision for every drone or swarm that is
//! waiting at a node. The clock does not move while a decision is
//! outstanding, so in-process and remote controllers yield identical runs.

mod scenario;
mod state;

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::composer::GreedyController;
use crate::energy::{electric_power, hover_power, segment_energy, BatteryState, FlightPoint};
use crate::model::{network_to_value, Direction, LegProfile, Point3, SkywayNetwork};
use crate::protocol::{
    handshake, Action, Arrival, ControlLink, Decision, ErrorCode, InProcessLink, Message, Reply,
    SessionError, TcpLink, PROTOCOL_VERSION,
};
use crate::telemetry::{
    export_events_csv, export_frames_csv, DroneStatus, DroneSummary, EventKind, Recorder,
    RunSummary, TelemetryFrame, TelemetrySink, TripEvent,
};

pub use scenario::{DeliveryRequest, FaultEvent, Scenario};
pub use state::{DroneState, Location, Phase, SimClock};

/// Slack for comparing phase timers against the step budget.
const TIME_EPS: f64 = 1e-9;
/// Slack for comparing leg distance against the distance coverable this step.
const DIST_EPS: f64 = 1e-9;
/// Arrival/decision exchanges one unit may have at a single instant before it is failed.
pub const MAX_EXCHANGES_PER_INSTANT: u32 = 64;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("controller session failed: {0}")]
    Session(#[from] SessionError),
    #[error("unknown segment \"{0}\"")]
    UnknownSegment(String),
}

struct Flight {
    segment: String,
    direction: Direction,
    from: String,
    to: String,
    points: Vec<Point3>,
    legs: Vec<LegProfile>,
    leg_power: Vec<f64>,
    hover_power: f64,
}

impl Flight {
    fn position(&self, phase: &Phase) -> Point3 {
        match phase {
            Phase::Takeoff { .. } => self.points[0],
            Phase::Cruising { leg, progress_m } => {
                self.points[*leg].lerp(&self.points[leg + 1], progress_m / self.legs[*leg].length)
            }
            _ => *self.points.last().expect("polyline has endpoints"),
        }
    }

    fn location(&self, phase: &Phase) -> Location {
        match phase {
            Phase::Takeoff { .. } => Location::Node(self.from.clone()),
            Phase::Cruising { .. } => Location::Segment {
                id: self.segment.clone(),
                direction: self.direction,
            },
            _ => Location::Node(self.to.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UnitState {
    Pending { release_tick: u64 },
    Deciding,
    Holding { until: u64 },
    Charging,
    Flying,
    Finished,
}

/// A request's drones, which always move and decide together.
struct Unit {
    request: DeliveryRequest,
    swarm_id: Option<String>,
    members: Vec<usize>,
    node: String,
    state: UnitState,
    stall_since: Option<u64>,
    flight: Option<Flight>,
}

struct Drone {
    state: DroneState,
    unit: usize,
    released: bool,
    reported_terminal: bool,
    last_power_w: f64,
    end_tick: Option<u64>,
}

#[derive(Default)]
struct PadBank {
    charging: Vec<usize>,
    /// (enqueue tick, drone id, drone index), kept sorted.
    queue: Vec<(u64, String, usize)>,
}

enum Applied {
    Settled,
    AskAgain,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub frames: Vec<TelemetryFrame>,
    pub events: Vec<TripEvent>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn frames_csv(&self) -> Vec<u8> {
        export_frames_csv(&self.frames)
    }

    pub fn events_csv(&self) -> Vec<u8> {
        export_events_csv(&self.events)
    }

    pub fn summary_json(&self) -> Vec<u8> {
        self.summary.to_json()
    }
}

pub struct Simulation {
    net: SkywayNetwork,
    scenario: Scenario,
    clock: SimClock,
    link: Box<dyn ControlLink>,
    sink: Box<dyn TelemetrySink>,
    availability: BTreeMap<String, bool>,
    drones: Vec<Drone>,
    units: Vec<Unit>,
    pads: BTreeMap<String, PadBank>,
    faults: Vec<FaultEvent>,
    next_fault: usize,
    live_faults: Vec<(String, bool)>,
    max_tick: u64,
    stall_ticks: u64,
    started: bool,
    finished: bool,
    frame_count: usize,
    event_count: usize,
}

impl Simulation {
    pub fn new(
        net: SkywayNetwork,
        scenario: Scenario,
        link: Box<dyn ControlLink>,
        sink: Box<dyn TelemetrySink>,
    ) -> Result<Self, EngineError> {
        let mut findings = net.findings();
        if findings.is_empty() {
            findings = scenario.findings(&net);
        }
        if !findings.is_empty() {
            return Err(EngineError::Config(findings));
        }

        let clock = SimClock::new(net.settings.dt_s);
        let capacity = net.settings.drone.battery_capacity_wh;

        let mut requests = scenario.requests.clone();
        requests.sort_by(|a, b| a.id.cmp(&b.id));

        let mut drones = Vec::new();
        let mut units = Vec::new();
        for (u, req) in requests.into_iter().enumerate() {
            let swarm_id = req.effective_swarm_id();
            let origin = net.node(&req.origin).expect("validated").position;
            for id in req.drone_ids() {
                drones.push(Drone {
                    state: DroneState {
                        id,
                        request_id: req.id.clone(),
                        swarm_id: swarm_id.clone(),
                        phase: Phase::IdleAtNode,
                        position: origin,
                        location: Location::Node(req.origin.clone()),
                        battery: BatteryState::full(capacity),
                        payload_kg: req.payload_kg,
                    },
                    unit: u,
                    released: false,
                    reported_terminal: false,
                    last_power_w: 0.0,
                    end_tick: None,
                });
            }
            units.push(Unit {
                node: req.origin.clone(),
                state: UnitState::Pending {
                    release_tick: clock.ticks_for(req.release_time_s),
                },
                request: req,
                swarm_id,
                members: Vec::new(),
                stall_since: None,
                flight: None,
            });
        }
        drones.sort_by(|a, b| a.state.id.cmp(&b.state.id));
        for (i, d) in drones.iter().enumerate() {
            units[d.unit].members.push(i);
        }

        let mut faults = scenario.faults.clone();
        faults.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));

        Ok(Self {
            availability: net.availability(),
            pads: net.nodes().map(|n| (n.id.clone(), PadBank::default())).collect(),
            max_tick: clock.ticks_for(scenario.max_time_s),
            stall_ticks: clock.ticks_for(scenario.stall_timeout_s),
            net,
            scenario,
            clock,
            link,
            sink,
            drones,
            units,
            faults,
            next_fault: 0,
            live_faults: Vec::new(),
            started: false,
            finished: false,
            frame_count: 0,
            event_count: 0,
        })
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn clock_mut(&mut self) -> &mut SimClock {
        &mut self.clock
    }

    pub fn network(&self) -> &SkywayNetwork {
        &self.net
    }

    pub fn availability(&self) -> &BTreeMap<String, bool> {
        &self.availability
    }

    pub fn drones(&self) -> impl Iterator<Item = &DroneState> {
        self.drones.iter().map(|d| &d.state)
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Queues an availability change; it takes effect at the next frame boundary.
    pub fn inject_fault(&mut self, segment: &str, available: bool) -> Result<(), EngineError> {
        if self.net.segment(segment).is_none() {
            return Err(EngineError::UnknownSegment(segment.to_string()));
        }
        self.live_faults.push((segment.to_string(), available));
        Ok(())
    }

    /// Handshake and the t = 0 boundary.
    pub fn start(&mut self) -> Result<(), EngineError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        let hello = Message::Hello {
            protocol_version: PROTOCOL_VERSION,
            network: network_to_value(&self.net),
            settings: self.net.settings.clone(),
            requests: self.scenario.requests.clone(),
        };
        handshake(self.link.as_mut(), &hello)?;
        self.settle_boundary()
    }

    /// Advances one `dt`. Returns `false` once the run is over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if !self.started {
            self.start()?;
        }
        if self.finished {
            return Ok(false);
        }
        self.clock.advance();
        for d in 0..self.drones.len() {
            let drone = &self.drones[d];
            if !drone.released || drone.state.phase.is_terminal() {
                continue;
            }
            match drone.state.phase {
                ref p if p.is_airborne() => self.fly(d),
                Phase::Charging { target_wh } => self.charge(d, target_wh),
                _ => self.drones[d].last_power_w = 0.0,
            }
        }
        self.settle_boundary()?;
        Ok(!self.finished)
    }

    /// Sends `End` and returns the run summary.
    pub fn finish(&mut self) -> Result<RunSummary, EngineError> {
        let summary = self.summary();
        self.link.notify(&Message::End {
            time_s: summary.total_time_s,
            summary: summary.clone(),
        })?;
        Ok(summary)
    }

    pub fn summary(&self) -> RunSummary {
        let mut drones = Vec::with_capacity(self.drones.len());
        let (mut completed, mut failed, mut energy) = (0, 0, 0.0);
        for d in &self.drones {
            let s = &d.state;
            let (status, reason) = match (&s.phase, d.released) {
                (Phase::Done, _) => (DroneStatus::Done, None),
                (Phase::Failed(r), _) => (DroneStatus::Failed, Some(r.clone())),
                (_, false) => (DroneStatus::Unreleased, None),
                _ => (DroneStatus::Active, None),
            };
            match status {
                DroneStatus::Done => completed += 1,
                DroneStatus::Failed => failed += 1,
                _ => {}
            }
            energy += s.battery.cumulative_consumed_wh;
            drones.push(DroneSummary {
                drone_id: s.id.clone(),
                request_id: s.request_id.clone(),
                swarm_id: s.swarm_id.clone(),
                status,
                failure_reason: reason,
                end_time_s: d.end_tick.map(|t| self.clock.time_of(t)),
                energy_wh: s.battery.cumulative_consumed_wh,
                final_soc_wh: s.battery.soc_wh,
            });
        }
        RunSummary {
            total_time_s: self.clock.now_s(),
            dt_s: self.clock.dt(),
            seed: self.scenario.seed,
            frame_count: self.frame_count,
            event_count: self.event_count,
            completed,
            failed,
            total_energy_wh: energy,
            drones,
        }
    }

    // ---- boundary processing ------------------------------------------

    fn settle_boundary(&mut self) -> Result<(), EngineError> {
        let nodes: Vec<String> = self.pads.keys().cloned().collect();
        for n in &nodes {
            self.fill_pads(n);
        }
        self.fire_faults()?;
        self.advance_units();
        for u in 0..self.units.len() {
            if self.units[u].state == UnitState::Deciding {
                self.decide(u)?;
            }
        }
        if self.clock.tick() >= self.max_tick {
            self.time_out();
        }
        self.emit_frames();
        self.finished = self
            .units
            .iter()
            .all(|u| u.state == UnitState::Finished);
        Ok(())
    }

    fn emit(&mut self, drone: usize, kind: EventKind, location: &str) {
        let event = TripEvent {
            time_s: self.clock.now_s(),
            drone_id: self.drones[drone].state.id.clone(),
            kind,
            location_id: location.to_string(),
        };
        self.event_count += 1;
        self.sink.event(&event);
    }

    fn location_id(&self, drone: usize) -> String {
        match &self.drones[drone].state.location {
            Location::Node(n) => n.clone(),
            Location::Segment { id, .. } => id.clone(),
        }
    }

    fn fail(&mut self, drone: usize, reason: &str) {
        let loc = self.location_id(drone);
        let d = &mut self.drones[drone];
        d.state.phase = Phase::Failed(reason.to_string());
        d.end_tick = Some(self.clock.tick());
        self.emit(drone, EventKind::Failed, &loc);
    }

    fn living(&self, unit: usize) -> Vec<usize> {
        self.units[unit]
            .members
            .iter()
            .copied()
            .filter(|&d| !self.drones[d].state.phase.is_terminal())
            .collect()
    }

    fn fill_pads(&mut self, node: &str) {
        let pad_count = self.net.node(node).map_or(0, |n| n.pad_count as usize);
        loop {
            let bank = self.pads.get_mut(node).expect("every node has a pad bank");
            if bank.charging.len() >= pad_count || bank.queue.is_empty() {
                break;
            }
            let (_, _, d) = bank.queue.remove(0);
            bank.charging.push(d);
            if let Phase::WaitingForPad { target_wh } = self.drones[d].state.phase {
                self.drones[d].state.phase = Phase::Charging { target_wh };
            }
            self.emit(d, EventKind::ChargeStart, node);
        }
    }

    fn fire_faults(&mut self) -> Result<(), EngineError> {
        let tick = self.clock.tick();
        let mut fired = Vec::new();
        while let Some(f) = self.faults.get(self.next_fault) {
            if self.clock.ticks_for(f.time_s) > tick {
                break;
            }
            fired.push((f.time_s, f.segment.clone(), f.available));
            self.next_fault += 1;
        }
        let now = self.clock.now_s();
        fired.extend(self.live_faults.drain(..).map(|(s, a)| (now, s, a)));
        for (time_s, segment, available) in fired {
            self.availability.insert(segment.clone(), available);
            self.link.notify(&Message::Fault {
                time_s,
                segment,
                available,
            })?;
        }
        Ok(())
    }

    fn advance_units(&mut self) {
        let tick = self.clock.tick();
        for u in 0..self.units.len() {
            match self.units[u].state {
                UnitState::Pending { release_tick } if release_tick <= tick => self.release(u),
                UnitState::Flying => {
                    let living = self.living(u);
                    if living.is_empty() {
                        self.units[u].state = UnitState::Finished;
                    } else if living
                        .iter()
                        .all(|&d| self.drones[d].state.phase == Phase::WaitingForDecision)
                    {
                        let flight = self.units[u].flight.take().expect("flying unit has a flight");
                        self.units[u].node = flight.to;
                        self.units[u].state = UnitState::Deciding;
                    }
                }
                UnitState::Charging => {
                    let living = self.living(u);
                    let busy = living.iter().any(|&d| {
                        matches!(
                            self.drones[d].state.phase,
                            Phase::Charging { .. } | Phase::WaitingForPad { .. }
                        )
                    });
                    if living.is_empty() {
                        self.units[u].state = UnitState::Finished;
                    } else if !busy {
                        self.set_deciding(u);
                    }
                }
                UnitState::Holding { until } if until <= tick => {
                    let stalled = self.units[u]
                        .stall_since
                        .is_some_and(|since| tick - since >= self.stall_ticks);
                    if stalled {
                        for d in self.living(u) {
                            self.fail(d, "stranded");
                        }
                        self.units[u].state = UnitState::Finished;
                    } else {
                        self.set_deciding(u);
                    }
                }
                _ => {}
            }
        }
    }

    fn set_deciding(&mut self, u: usize) {
        for d in self.living(u) {
            self.drones[d].state.phase = Phase::WaitingForDecision;
        }
        self.units[u].state = UnitState::Deciding;
    }

    fn release(&mut self, u: usize) {
        let origin = self.units[u].request.origin.clone();
        let position = self.net.node(&origin).expect("validated").position;
        for d in self.units[u].members.clone() {
            let drone = &mut self.drones[d];
            drone.released = true;
            drone.state.position = position;
            drone.state.location = Location::Node(origin.clone());
            drone.state.phase = Phase::WaitingForDecision;
            self.emit(d, EventKind::NodeArrive, &origin);
        }
        self.units[u].node = origin;
        self.units[u].state = UnitState::Deciding;
    }

    fn time_out(&mut self) {
        for u in 0..self.units.len() {
            match self.units[u].state {
                UnitState::Finished => continue,
                UnitState::Pending { .. } => {}
                _ => {
                    for d in self.living(u) {
                        self.fail(d, "timeout");
                    }
                }
            }
            self.units[u].state = UnitState::Finished;
        }
    }

    fn emit_frames(&mut self) {
        let time_s = self.clock.now_s();
        let cruise = self.net.settings.drone.cruise_speed_mps;
        for i in 0..self.drones.len() {
            let d = &self.drones[i];
            if !d.released || d.reported_terminal {
                continue;
            }
            let s = &d.state;
            let (node_id, segment_id) = match (&s.phase, &s.location) {
                (p, _) if p.is_terminal() => (None, None),
                (_, Location::Node(n)) => (Some(n.clone()), None),
                (_, Location::Segment { id, .. }) => (None, Some(id.clone())),
            };
            let frame = TelemetryFrame {
                time_s,
                drone_id: s.id.clone(),
                swarm_id: s.swarm_id.clone(),
                x_m: s.position.x(),
                y_m: s.position.y(),
                z_m: s.position.z(),
                phase: s.phase.label().to_string(),
                speed_mps: if matches!(s.phase, Phase::Cruising { .. }) {
                    cruise
                } else {
                    0.0
                },
                power_w: d.last_power_w,
                soc_wh: s.battery.soc_wh,
                soc_pct: s.battery.soc_pct(),
                cum_energy_wh: s.battery.cumulative_consumed_wh,
                node_id,
                segment_id,
                payload_kg: s.payload_kg,
            };
            let terminal = s.phase.is_terminal();
            self.sink.frame(&frame);
            self.frame_count += 1;
            if terminal {
                self.drones[i].reported_terminal = true;
            }
        }
    }

    // ---- physics ------------------------------------------------------

    fn fly(&mut self, d: usize) {
        let dt = self.clock.dt();
        let speed = self.net.settings.drone.cruise_speed_mps;
        let hover_landing = self.net.settings.hover_landing_s;
        let flight = self.units[self.drones[d].unit]
            .flight
            .as_ref()
            .expect("airborne drone has a flight");

        let mut phase = self.drones[d].state.phase.clone();
        let mut budget = dt;
        let mut energy_j = 0.0;
        let mut milestones = Vec::new();
        let mut landed = false;

        loop {
            match phase {
                Phase::Takeoff { remaining_s } => {
                    if remaining_s <= budget + TIME_EPS {
                        let used = remaining_s.min(budget);
                        energy_j += flight.hover_power * used;
                        budget -= used;
                        phase = Phase::Cruising {
                            leg: 0,
                            progress_m: 0.0,
                        };
                        milestones.push(EventKind::SegmentStart);
                    } else {
                        energy_j += flight.hover_power * budget;
                        phase = Phase::Takeoff {
                            remaining_s: remaining_s - budget,
                        };
                        budget = 0.0;
                    }
                }
                Phase::Cruising { leg, progress_m } => {
                    let left = flight.legs[leg].length - progress_m;
                    let reach = speed * budget;
                    if left <= reach + DIST_EPS {
                        let used = (left / speed).min(budget);
                        energy_j += flight.leg_power[leg] * used;
                        budget -= used;
                        if leg + 1 < flight.legs.len() {
                            phase = Phase::Cruising {
                                leg: leg + 1,
                                progress_m: 0.0,
                            };
                        } else {
                            milestones.push(EventKind::SegmentEnd);
                            phase = Phase::Landing {
                                remaining_s: hover_landing,
                            };
                        }
                    } else {
                        energy_j += flight.leg_power[leg] * budget;
                        phase = Phase::Cruising {
                            leg,
                            progress_m: progress_m + reach,
                        };
                        budget = 0.0;
                    }
                }
                Phase::Landing { remaining_s } => {
                    if remaining_s <= budget + TIME_EPS {
                        let used = remaining_s.min(budget);
                        energy_j += flight.hover_power * used;
                        landed = true;
                        milestones.push(EventKind::NodeArrive);
                        break;
                    }
                    energy_j += flight.hover_power * budget;
                    phase = Phase::Landing {
                        remaining_s: remaining_s - budget,
                    };
                    budget = 0.0;
                }
                _ => unreachable!("fly() called on a landed drone"),
            }
            if budget <= TIME_EPS {
                if let Phase::Landing { remaining_s } = phase {
                    if remaining_s <= TIME_EPS {
                        landed = true;
                        milestones.push(EventKind::NodeArrive);
                    }
                }
                break;
            }
        }

        let mean_power = energy_j / dt;
        let position = flight.position(&phase);
        let location = flight.location(&phase);
        let segment = flight.segment.clone();
        let to = flight.to.clone();

        match self.drones[d].state.battery.discharge(mean_power, dt) {
            Ok(battery) => {
                let drone = &mut self.drones[d];
                drone.state.battery = battery;
                drone.last_power_w = mean_power;
                drone.state.position = position;
                drone.state.location = location;
                drone.state.phase = if landed {
                    Phase::WaitingForDecision
                } else {
                    phase
                };
                for kind in milestones {
                    let at = if kind == EventKind::NodeArrive { &to } else { &segment };
                    self.emit(d, kind, at);
                }
            }
            Err(_) => {
                self.drones[d].last_power_w = 0.0;
                self.fail(d, "depleted");
            }
        }
    }

    fn charge(&mut self, d: usize, target_wh: f64) {
        let Location::Node(node) = self.drones[d].state.location.clone() else {
            unreachable!("charging drone is at a node");
        };
        let pad_power = self.net.node(&node).map_or(0.0, |n| n.charge_power_w);
        let efficiency = self.net.settings.drone.charge_efficiency;
        let drone = &mut self.drones[d];
        drone.last_power_w = 0.0;
        drone.state.battery = drone
            .state
            .battery
            .charge(pad_power, efficiency, self.clock.dt());
        if drone.state.battery.soc_wh >= target_wh {
            drone.state.phase = Phase::IdleAtNode;
            if let Some(bank) = self.pads.get_mut(&node) {
                bank.charging.retain(|&x| x != d);
            }
            self.emit(d, EventKind::ChargeEnd, &node);
        }
    }

    // ---- decisions ----------------------------------------------------

    fn arrival(&self, u: usize) -> Arrival {
        let unit = &self.units[u];
        let living = self.living(u);
        let leader = &self.drones[living[0]].state;
        let soc = living
            .iter()
            .map(|&d| self.drones[d].state.battery.soc_wh)
            .fold(f64::INFINITY, f64::min);
        Arrival {
            time_s: self.clock.now_s(),
            drone_id: leader.id.clone(),
            swarm_id: unit.swarm_id.clone(),
            request_id: unit.request.id.clone(),
            node_id: unit.node.clone(),
            soc_wh: soc,
            payload_kg: unit.request.payload_kg,
            availability: self.availability.clone(),
        }
    }

    fn addresses(&self, u: usize, decision: &Decision) -> bool {
        let unit = &self.units[u];
        if let (Some(want), Some(have)) = (&decision.swarm_id, &unit.swarm_id) {
            if want == have {
                return true;
            }
        }
        decision.drone_id.as_ref().is_some_and(|id| {
            self.living(u)
                .iter()
                .any(|&d| &self.drones[d].state.id == id)
        })
    }

    fn decide(&mut self, u: usize) -> Result<(), EngineError> {
        for _ in 0..MAX_EXCHANGES_PER_INSTANT {
            let arrival = self.arrival(u);
            let decision = match self.link.request(&Message::Arrival(arrival))? {
                Reply::Message(Message::Decision(d)) => d,
                Reply::Message(other) => {
                    self.link.notify(&Message::error(
                        ErrorCode::Unexpected,
                        format!("expected decision, got {}", other.type_name()),
                    ))?;
                    continue;
                }
                Reply::Garbled(e) => {
                    self.link.notify(&Message::error(e.code, e.detail))?;
                    continue;
                }
            };
            if !self.addresses(u, &decision) {
                let who = decision
                    .swarm_id
                    .clone()
                    .or(decision.drone_id.clone())
                    .unwrap_or_default();
                self.link.notify(&Message::error(
                    ErrorCode::UnknownDrone,
                    format!("no drone or swarm \"{who}\" is waiting for a decision"),
                ))?;
                continue;
            }
            match self.apply(u, &decision.action) {
                Ok(Applied::Settled) => return Ok(()),
                Ok(Applied::AskAgain) => continue,
                Err(reason) => {
                    self.link.notify(&Message::Rejection { decision, reason })?;
                }
            }
        }
        for d in self.living(u) {
            self.fail(d, "stalled");
        }
        self.units[u].state = UnitState::Finished;
        Ok(())
    }

    fn apply(&mut self, u: usize, action: &Action) -> Result<Applied, String> {
        match action {
            Action::Traverse { segment } => self.apply_traverse(u, segment),
            Action::Charge { target_wh } => self.apply_charge(u, *target_wh),
            Action::Wait { duration_s } => {
                if !(duration_s.is_finite() && *duration_s >= 0.0) {
                    return Err(format!("invalid wait duration {duration_s}"));
                }
                let now = self.clock.tick();
                let until = now + self.clock.ticks_for(*duration_s).max(1);
                let unit = &mut self.units[u];
                unit.stall_since.get_or_insert(now);
                unit.state = UnitState::Holding { until };
                for d in self.living(u) {
                    self.drones[d].state.phase = Phase::IdleAtNode;
                }
                Ok(Applied::Settled)
            }
            Action::Complete => {
                let node = self.units[u].node.clone();
                if node != self.units[u].request.destination {
                    return Err(format!(
                        "complete at \"{node}\" but destination is \"{}\"",
                        self.units[u].request.destination
                    ));
                }
                for d in self.living(u) {
                    self.drones[d].state.phase = Phase::Done;
                    self.drones[d].end_tick = Some(self.clock.tick());
                    self.emit(d, EventKind::Complete, &node);
                }
                self.units[u].state = UnitState::Finished;
                Ok(Applied::Settled)
            }
        }
    }

    fn apply_traverse(&mut self, u: usize, segment: &str) -> Result<Applied, String> {
        let node = self.units[u].node.clone();
        let seg = self
            .net
            .segment(segment)
            .ok_or_else(|| format!("unknown segment \"{segment}\""))?;
        let direction = seg
            .direction_from(&node)
            .ok_or_else(|| format!("segment \"{segment}\" does not touch node \"{node}\""))?;
        if !self.availability.get(segment).copied().unwrap_or(false) {
            return Err(format!("segment \"{segment}\" is unavailable"));
        }

        let settings = &self.net.settings;
        let (spec, env) = (&settings.drone, &settings.environment);
        let payload = self.units[u].request.payload_kg;
        let legs = self.net.leg_profiles(seg, direction);
        let energy = segment_energy(spec, env, &legs, payload, settings.hover_times())
            .map_err(|e| e.to_string())?;
        let required = energy * (1.0 + settings.reserve_fraction);
        for d in self.living(u) {
            let soc = self.drones[d].state.battery.soc_wh;
            if soc < required {
                return Err(format!(
                    "drone \"{}\" has {soc} Wh, segment \"{segment}\" needs {required} Wh with reserve",
                    self.drones[d].state.id
                ));
            }
        }

        let mass = spec.empty_mass() + payload;
        let leg_power = legs
            .iter()
            .map(|l| {
                electric_power(
                    spec,
                    env,
                    &FlightPoint {
                        airspeed: spec.cruise_speed_mps,
                        climb_angle: l.climb_angle,
                        total_mass: mass,
                    },
                )
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let hover = hover_power(spec, env, payload).map_err(|e| e.to_string())?;
        let (from, to) = seg.endpoints(direction);
        let flight = Flight {
            segment: segment.to_string(),
            direction,
            from: from.to_string(),
            to: to.to_string(),
            points: self.net.polyline_points(seg, direction),
            legs,
            leg_power,
            hover_power: hover,
        };

        let takeoff = settings.hover_takeoff_s;
        let start = if takeoff <= TIME_EPS {
            Phase::Cruising {
                leg: 0,
                progress_m: 0.0,
            }
        } else {
            Phase::Takeoff {
                remaining_s: takeoff,
            }
        };
        for d in self.living(u) {
            self.emit(d, EventKind::NodeDepart, &node);
            let drone = &mut self.drones[d];
            drone.state.phase = start.clone();
            drone.state.location = flight.location(&start);
            drone.state.position = flight.position(&start);
            if matches!(start, Phase::Cruising { .. }) {
                self.emit(d, EventKind::SegmentStart, segment);
            }
        }
        let unit = &mut self.units[u];
        unit.flight = Some(flight);
        unit.state = UnitState::Flying;
        unit.stall_since = None;
        Ok(Applied::Settled)
    }

    fn apply_charge(&mut self, u: usize, target_wh: f64) -> Result<Applied, String> {
        let capacity = self.net.settings.drone.battery_capacity_wh;
        if !(target_wh.is_finite() && target_wh >= 0.0 && target_wh <= capacity) {
            return Err(format!("charge target {target_wh} Wh outside [0, {capacity}]"));
        }
        let node = self.units[u].node.clone();
        let needy: Vec<usize> = self
            .living(u)
            .into_iter()
            .filter(|&d| self.drones[d].state.battery.soc_wh < target_wh)
            .collect();
        if needy.is_empty() {
            return Ok(Applied::AskAgain);
        }
        if self.net.node(&node).map_or(0.0, |n| n.charge_power_w) <= 0.0 {
            return Err(format!("node \"{node}\" cannot charge"));
        }
        let tick = self.clock.tick();
        for d in self.living(u) {
            self.drones[d].state.phase = Phase::IdleAtNode;
        }
        let bank = self.pads.get_mut(&node).expect("every node has a pad bank");
        for &d in &needy {
            self.drones[d].state.phase = Phase::WaitingForPad { target_wh };
            bank.queue.push((tick, self.drones[d].state.id.clone(), d));
        }
        bank.queue.sort();
        let unit = &mut self.units[u];
        unit.state = UnitState::Charging;
        unit.stall_since = None;
        self.fill_pads(&node);
        Ok(Applied::Settled)
    }
}

/// Runs to completion, collecting telemetry in memory.
pub fn run(
    net: &SkywayNetwork,
    scenario: &Scenario,
    link: Box<dyn ControlLink>,
) -> Result<RunResult, EngineError> {
    let recorder = Arc::new(Mutex::new(Recorder::default()));
    let mut sim = Simulation::new(net.clone(), scenario.clone(), link, Box::new(recorder.clone()))?;
    sim.start()?;
    while sim.step()? {}
    let summary = sim.finish()?;
    drop(sim);
    let recorder = Arc::try_unwrap(recorder)
        .map(|m| m.into_inner().expect("recorder lock"))
        .unwrap_or_else(|shared| shared.lock().expect("recorder lock").clone());
    Ok(RunResult {
        frames: recorder.frames,
        events: recorder.events,
        summary,
    })
}

/// Who makes routing decisions: `builtin:<name>` or `tcp:<host>:<port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerSpec {
    Builtin(String),
    /// Address the engine listens on for the controller to connect.
    Tcp(String),
}

impl std::str::FromStr for ControllerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix("builtin:") {
            if GreedyController::by_name(name).is_none() {
                return Err(format!("unknown builtin controller \"{name}\" (greedy, static)"));
            }
            return Ok(ControllerSpec::Builtin(name.to_string()));
        }
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.rsplit_once(':').is_some_and(|(_, p)| p.parse::<u16>().is_ok()) {
                return Ok(ControllerSpec::Tcp(addr.to_string()));
            }
            return Err(format!("expected tcp:<host>:<port>, got \"{s}\""));
        }
        Err(format!("controller must be builtin:<name> or tcp:<host>:<port>, got \"{s}\""))
    }
}

impl ControllerSpec {
    /// Opens a link; for TCP this blocks until a controller connects or `accept_timeout` passes.
    pub fn open(
        &self,
        accept_timeout: Duration,
        decision_timeout: Duration,
    ) -> Result<Box<dyn ControlLink>, SessionError> {
        match self {
            ControllerSpec::Builtin(name) => {
                let c = GreedyController::by_name(name).expect("validated when parsed");
                Ok(Box::new(InProcessLink::new(c)))
            }
            ControllerSpec::Tcp(addr) => {
                let listener = TcpListener::bind(addr.as_str())?;
                Ok(Box::new(TcpLink::accept(&listener, accept_timeout, decision_timeout)?))
            }
        }
    }
}

/// Convenience: run with a built-in controller (`"greedy"` or `"static"`).
pub fn run_builtin(
    net: &SkywayNetwork,
    scenario: &Scenario,
    name: &str,
) -> Result<RunResult, EngineError> {
    let controller = GreedyController::by_name(name)
        .ok_or_else(|| EngineError::Config(vec![format!("unknown builtin controller \"{name}\"")]))?;
    run(net, scenario, Box::new(InProcessLink::new(controller)))
}
