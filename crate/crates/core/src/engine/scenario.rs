use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::json::from_json_bytes;
use crate::model::{is_valid_id, ModelError, SkywayNetwork};

fn one() -> u32 {
    1
}

fn default_max_time() -> f64 {
    3600.0
}

fn default_stall_timeout() -> f64 {
    300.0
}

/// A package delivery served by one drone or a swarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliveryRequest {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub payload_kg: f64,
    #[serde(default = "one")]
    pub swarm_size: u32,
    #[serde(default)]
    pub release_time_s: f64,
    /// Overrides the swarm label. Swarms of two or more default to the request id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swarm_id: Option<String>,
}

impl DeliveryRequest {
    pub fn new(
        id: impl Into<String>,
        origin: impl Into<String>,
        destination: impl Into<String>,
        payload_kg: f64,
    ) -> Self {
        Self {
            id: id.into(),
            origin: origin.into(),
            destination: destination.into(),
            payload_kg,
            swarm_size: 1,
            release_time_s: 0.0,
            swarm_id: None,
        }
    }

    pub fn with_swarm(mut self, size: u32) -> Self {
        self.swarm_size = size;
        self
    }

    pub fn released_at(mut self, time_s: f64) -> Self {
        self.release_time_s = time_s;
        self
    }

    pub fn effective_swarm_id(&self) -> Option<String> {
        match (&self.swarm_id, self.swarm_size) {
            (Some(s), _) => Some(s.clone()),
            (None, n) if n > 1 => Some(self.id.clone()),
            _ => None,
        }
    }

    /// Drone ids: the request id for a single drone, `<id>-<k>` for swarm members.
    pub fn drone_ids(&self) -> Vec<String> {
        if self.swarm_size == 1 {
            vec![self.id.clone()]
        } else {
            (1..=self.swarm_size).map(|k| format!("{}-{k}", self.id)).collect()
        }
    }
}

/// Scheduled change of a segment's availability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub time_s: f64,
    pub segment: String,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub requests: Vec<DeliveryRequest>,
    #[serde(default)]
    pub faults: Vec<FaultEvent>,
    #[serde(default = "default_max_time")]
    pub max_time_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Holding at a node this long without charging or departing strands the drone.
    #[serde(default = "default_stall_timeout")]
    pub stall_timeout_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            requests: Vec::new(),
            faults: Vec::new(),
            max_time_s: default_max_time(),
            seed: 0,
            stall_timeout_s: default_stall_timeout(),
        }
    }
}

impl Scenario {
    pub fn new(requests: Vec<DeliveryRequest>) -> Self {
        Self {
            requests,
            ..Self::default()
        }
    }

    pub fn with_faults(mut self, faults: Vec<FaultEvent>) -> Self {
        self.faults = faults;
        self
    }

    pub fn load(document: &[u8]) -> Result<Self, ModelError> {
        from_json_bytes(document)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("scenario is serializable");
        out.push(b'\n');
        out
    }

    /// Admission problems against `net`. Empty means the scenario can run.
    pub fn findings(&self, net: &SkywayNetwork) -> Vec<String> {
        let mut out = Vec::new();
        let capacity = net.settings.drone.payload_capacity_kg;
        let mut request_ids = BTreeSet::new();
        let mut drone_ids = BTreeSet::new();
        for r in &self.requests {
            if !is_valid_id(&r.id) {
                out.push(format!("request id \"{}\" must match [A-Za-z0-9_-]+", r.id));
            }
            if !request_ids.insert(r.id.as_str()) {
                out.push(format!("duplicate request id \"{}\"", r.id));
            }
            for end in [&r.origin, &r.destination] {
                if net.node(end).is_none() {
                    out.push(format!("request \"{}\" references unknown node \"{}\"", r.id, end));
                }
            }
            if r.origin == r.destination {
                out.push(format!("request \"{}\" has origin equal to destination", r.id));
            }
            if !(r.payload_kg.is_finite() && r.payload_kg >= 0.0 && r.payload_kg <= capacity) {
                out.push(format!(
                    "request \"{}\" payload {} kg outside [0, {capacity}]",
                    r.id, r.payload_kg
                ));
            }
            if r.swarm_size < 1 {
                out.push(format!("request \"{}\" needs swarm_size >= 1", r.id));
            }
            if !(r.release_time_s.is_finite() && r.release_time_s >= 0.0) {
                out.push(format!("request \"{}\" release_time_s must be >= 0", r.id));
            }
            if let Some(s) = &r.swarm_id {
                if !is_valid_id(s) {
                    out.push(format!("swarm id \"{s}\" must match [A-Za-z0-9_-]+"));
                }
            }
            for d in r.drone_ids() {
                if !drone_ids.insert(d.clone()) {
                    out.push(format!("drone id \"{d}\" is generated twice"));
                }
            }
        }
        for f in &self.faults {
            if net.segment(&f.segment).is_none() {
                out.push(format!("fault references unknown segment \"{}\"", f.segment));
            }
            if !(f.time_s.is_finite() && f.time_s >= 0.0) {
                out.push(format!("fault on \"{}\" has invalid time {}", f.segment, f.time_s));
            }
        }
        if !(self.max_time_s.is_finite() && self.max_time_s > 0.0) {
            out.push("max_time_s must be > 0".into());
        }
        if !(self.stall_timeout_s.is_finite() && self.stall_timeout_s >= 0.0) {
            out.push("stall_timeout_s must be >= 0".into());
        }
        out
    }
}
