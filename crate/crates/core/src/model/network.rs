use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{polyline_legs, Direction, LegProfile, Point3};
use super::ModelError;
use crate::energy::{DroneSpec, EnvironmentParams, HoverTimes};

/// Rooftop vertex with landing and charging pads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub position: Point3,
    pub pad_count: u32,
    pub charge_power_w: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, position: Point3) -> Self {
        Self {
            id: id.into(),
            position,
            pad_count: 1,
            charge_power_w: 200.0,
        }
    }

    pub fn with_pads(mut self, pad_count: u32) -> Self {
        self.pad_count = pad_count;
        self
    }

    pub fn with_charge_power(mut self, watts: f64) -> Self {
        self.charge_power_w = watts;
        self
    }
}

/// Bidirectional aerial corridor between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub id: String,
    pub from: String,
    pub to: String,
    pub waypoints: Vec<Point3>,
    pub available: bool,
}

impl Segment {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            waypoints: Vec::new(),
            available: true,
        }
    }

    pub fn with_waypoints(mut self, waypoints: Vec<Point3>) -> Self {
        self.waypoints = waypoints;
        self
    }

    pub fn touches(&self, node: &str) -> bool {
        self.from == node || self.to == node
    }

    /// Direction in which this segment leaves `node`, if incident.
    pub fn direction_from(&self, node: &str) -> Option<Direction> {
        if self.from == node {
            Some(Direction::Forward)
        } else if self.to == node {
            Some(Direction::Reverse)
        } else {
            None
        }
    }

    pub fn endpoints(&self, dir: Direction) -> (&str, &str) {
        match dir {
            Direction::Forward => (&self.from, &self.to),
            Direction::Reverse => (&self.to, &self.from),
        }
    }

    fn same_corridor(&self, other: &Segment) -> bool {
        if self.from == other.from && self.to == other.to {
            return self.waypoints == other.waypoints;
        }
        if self.from == other.to && self.to == other.from {
            return self.waypoints.iter().eq(other.waypoints.iter().rev());
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt_s: f64,
    pub reserve_fraction: f64,
    pub hover_takeoff_s: f64,
    pub hover_landing_s: f64,
    pub drone: DroneSpec,
    pub environment: EnvironmentParams,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt_s: 0.1,
            reserve_fraction: 0.1,
            hover_takeoff_s: 5.0,
            hover_landing_s: 10.0,
            drone: DroneSpec::default(),
            environment: EnvironmentParams::default(),
        }
    }
}

impl SimSettings {
    pub fn hover_times(&self) -> HoverTimes {
        HoverTimes {
            takeoff_s: self.hover_takeoff_s,
            landing_s: self.hover_landing_s,
        }
    }

    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            out.push("settings.dt_s must be > 0".to_string());
        }
        if !(self.reserve_fraction.is_finite()
            && (0.0..1.0).contains(&self.reserve_fraction))
        {
            out.push("settings.reserve_fraction must be in [0, 1)".to_string());
        }
        for (v, name) in [
            (self.hover_takeoff_s, "hover_takeoff_s"),
            (self.hover_landing_s, "hover_landing_s"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("settings.{name} must be >= 0"));
            }
        }
        out.extend(self.drone.findings());
        out.extend(self.environment.findings());
        out
    }
}

/// Ids end up unquoted in CSV exports, so they are kept to a safe alphabet.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// The skyway graph. Nodes and segments are keyed (and therefore ordered) by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkywayNetwork {
    pub(crate) nodes: BTreeMap<String, Node>,
    pub(crate) segments: BTreeMap<String, Segment>,
    pub settings: SimSettings,
}

impl SkywayNetwork {
    pub fn new(settings: SimSettings) -> Self {
        Self {
            nodes: BTreeMap::new(),
            segments: BTreeMap::new(),
            settings,
        }
    }

    /// Builds a network from parts and validates it.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = Node>,
        segments: impl IntoIterator<Item = Segment>,
        settings: SimSettings,
    ) -> Result<Self, ModelError> {
        let mut findings = Vec::new();
        let mut net = Self::new(settings);
        for node in nodes {
            if net.nodes.contains_key(&node.id) {
                findings.push(format!("duplicate node id \"{}\"", node.id));
            } else {
                net.nodes.insert(node.id.clone(), node);
            }
        }
        for seg in segments {
            if net.segments.contains_key(&seg.id) {
                findings.push(format!("duplicate segment id \"{}\"", seg.id));
            } else {
                net.segments.insert(seg.id.clone(), seg);
            }
        }
        findings.extend(net.findings());
        if findings.is_empty() {
            Ok(net)
        } else {
            Err(ModelError::Invalid(findings))
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn segment(&self, id: &str) -> Option<&Segment> {
        self.segments.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Segments touching `node`, in id order.
    pub fn incident<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Segment> + 'a {
        self.segments.values().filter(move |s| s.touches(node))
    }

    /// Availability flag of every segment.
    pub fn availability(&self) -> BTreeMap<String, bool> {
        self.segments
            .values()
            .map(|s| (s.id.clone(), s.available))
            .collect()
    }

    /// Every invariant violation, as human-readable findings. Empty means valid.
    pub fn findings(&self) -> Vec<String> {
        let mut out = self.settings.findings();
        for node in self.nodes.values() {
            if !is_valid_id(&node.id) {
                out.push(format!("node id \"{}\" must match [A-Za-z0-9_-]+", node.id));
            }
            if !node.position.is_finite() {
                out.push(format!("node \"{}\" has a non-finite position", node.id));
            } else if node.position.z() < 0.0 {
                out.push(format!("node \"{}\" has negative altitude", node.id));
            }
            if node.pad_count < 1 {
                out.push(format!("node \"{}\" needs at least one pad", node.id));
            }
            if !(node.charge_power_w.is_finite() && node.charge_power_w >= 0.0) {
                out.push(format!("node \"{}\" charge_power_w must be >= 0", node.id));
            }
        }
        for seg in self.segments.values() {
            out.extend(self.segment_findings(seg));
        }
        let segs: Vec<&Segment> = self.segments.values().collect();
        for (i, a) in segs.iter().enumerate() {
            for b in &segs[i + 1..] {
                if a.same_corridor(b) {
                    out.push(format!(
                        "segments \"{}\" and \"{}\" duplicate the same corridor",
                        a.id, b.id
                    ));
                }
            }
        }
        out
    }

    fn segment_findings(&self, seg: &Segment) -> Vec<String> {
        let mut out = Vec::new();
        if !is_valid_id(&seg.id) {
            out.push(format!("segment id \"{}\" must match [A-Za-z0-9_-]+", seg.id));
        }
        if seg.from == seg.to {
            out.push(format!(
                "segment \"{}\" connects node \"{}\" to itself",
                seg.id, seg.from
            ));
            return out;
        }
        for end in [&seg.from, &seg.to] {
            if !self.nodes.contains_key(end) {
                out.push(format!(
                    "segment \"{}\" references unknown node \"{}\"",
                    seg.id, end
                ));
            }
        }
        if !out.is_empty() {
            return out;
        }
        if seg.waypoints.iter().any(|w| !w.is_finite()) {
            out.push(format!("segment \"{}\" has a non-finite waypoint", seg.id));
            return out;
        }
        let pts = self.polyline_points(seg, Direction::Forward);
        for (i, w) in pts.windows(2).enumerate() {
            let len = w[0].distance(&w[1]);
            if !(len > 0.0 && len.is_finite()) {
                out.push(format!("segment \"{}\" leg {} has zero length", seg.id, i));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let findings = self.findings();
        if findings.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(findings))
        }
    }

    /// Polyline vertices in flight order, endpoints included.
    ///
    /// Panics if the segment's endpoints are not in this network.
    pub fn polyline_points(&self, seg: &Segment, dir: Direction) -> Vec<Point3> {
        let from = self.nodes[&seg.from].position;
        let to = self.nodes[&seg.to].position;
        let mut pts = Vec::with_capacity(seg.waypoints.len() + 2);
        pts.push(from);
        pts.extend(seg.waypoints.iter().copied());
        pts.push(to);
        if dir == Direction::Reverse {
            pts.reverse();
        }
        pts
    }

    pub fn segment_length(&self, seg: &Segment) -> f64 {
        self.leg_profiles(seg, Direction::Forward)
            .iter()
            .map(|l| l.length)
            .sum()
    }

    pub fn leg_profiles(&self, seg: &Segment, dir: Direction) -> Vec<LegProfile> {
        polyline_legs(&self.polyline_points(seg, dir))
    }

    // ---- edit operations ----------------------------------------------

    fn commit(&mut self, candidate: SkywayNetwork) -> Result<(), ModelError> {
        candidate.validate()?;
        *self = candidate;
        Ok(())
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), ModelError> {
        if self.nodes.contains_key(&node.id) {
            return Err(ModelError::DuplicateId(node.id));
        }
        let mut next = self.clone();
        next.nodes.insert(node.id.clone(), node);
        self.commit(next)
    }

    /// Removes the node and every segment touching it.
    pub fn remove_node(&mut self, id: &str) -> Result<Node, ModelError> {
        let node = self
            .nodes
            .remove(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?;
        self.segments.retain(|_, s| !s.touches(id));
        Ok(node)
    }

    pub fn move_node(&mut self, id: &str, position: Point3) -> Result<(), ModelError> {
        let mut next = self.clone();
        next.nodes
            .get_mut(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?
            .position = position;
        self.commit(next)
    }

    pub fn add_segment(&mut self, seg: Segment) -> Result<(), ModelError> {
        if seg.from == seg.to {
            return Err(ModelError::SelfLoop(seg.id));
        }
        if self.segments.contains_key(&seg.id) {
            return Err(ModelError::DuplicateId(seg.id));
        }
        for end in [&seg.from, &seg.to] {
            if !self.nodes.contains_key(end) {
                return Err(ModelError::UnknownId(end.clone()));
            }
        }
        let mut next = self.clone();
        next.segments.insert(seg.id.clone(), seg);
        self.commit(next)
    }

    pub fn remove_segment(&mut self, id: &str) -> Result<Segment, ModelError> {
        self.segments
            .remove(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))
    }

    pub fn set_segment_availability(&mut self, id: &str, available: bool) -> Result<(), ModelError> {
        self.segments
            .get_mut(id)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))?
            .available = available;
        Ok(())
    }

    pub fn set_settings(&mut self, settings: SimSettings) -> Result<(), ModelError> {
        let mut next = self.clone();
        next.settings = settings;
        self.commit(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> SkywayNetwork {
        let mut nodes = vec![Node::new("hub", Point3::new(0.0, 0.0, 10.0))];
        let mut segs = Vec::new();
        for (i, (x, y)) in [(100.0, 0.0), (0.0, 100.0), (-100.0, 0.0)].iter().enumerate() {
            let id = format!("n{i}");
            nodes.push(Node::new(&id, Point3::new(*x, *y, 10.0)));
            segs.push(Segment::new(format!("s{i}"), "hub", id));
        }
        segs.push(Segment::new("s9", "n0", "n1"));
        SkywayNetwork::from_parts(nodes, segs, SimSettings::default()).unwrap()
    }

    #[test]
    fn remove_node_cascades() {
        let mut net = star();
        assert_eq!(net.segment_count(), 4);
        net.remove_node("hub").unwrap();
        assert_eq!(net.segment_count(), 1);
        assert!(net.segments().all(|s| !s.touches("hub")));
        net.validate().unwrap();
    }

    #[test]
    fn self_loop_is_rejected() {
        let mut net = star();
        let err = net.add_segment(Segment::new("bad", "n0", "n0")).unwrap_err();
        assert!(matches!(err, ModelError::SelfLoop(_)));
    }

    #[test]
    fn duplicate_and_unknown_ids() {
        let mut net = star();
        assert!(matches!(
            net.add_node(Node::new("hub", Point3::default())),
            Err(ModelError::DuplicateId(_))
        ));
        assert!(matches!(net.remove_segment("nope"), Err(ModelError::UnknownId(_))));
        assert!(matches!(
            net.add_segment(Segment::new("s5", "hub", "X")),
            Err(ModelError::UnknownId(id)) if id == "X"
        ));
    }

    #[test]
    fn reversed_duplicate_corridor_is_rejected() {
        let mut net = star();
        let err = net.add_segment(Segment::new("s0b", "n0", "hub")).unwrap_err();
        assert!(err.to_string().contains("duplicate the same corridor"));
        // Same pair through a different waypoint is a distinct corridor.
        net.add_segment(
            Segment::new("s0c", "n0", "hub").with_waypoints(vec![Point3::new(50.0, 20.0, 30.0)]),
        )
        .unwrap();
    }

    #[test]
    fn move_onto_waypoint_is_rejected_and_state_kept() {
        let mut net = star();
        net.add_segment(
            Segment::new("w", "n0", "n2").with_waypoints(vec![Point3::new(0.0, -50.0, 40.0)]),
        )
        .unwrap();
        let before = net.clone();
        assert!(net.move_node("n0", Point3::new(0.0, -50.0, 40.0)).is_err());
        assert_eq!(net, before);
    }

    #[test]
    fn geometry_level_and_sloped() {
        let nodes = [
            Node::new("a", Point3::new(0.0, 0.0, 0.0)),
            Node::new("b", Point3::new(100.0, 0.0, 0.0)),
            Node::new("c", Point3::new(140.0, 0.0, 30.0)),
        ];
        let segs = [Segment::new("ab", "a", "b"), Segment::new("bc", "b", "c")];
        let net = SkywayNetwork::from_parts(nodes, segs, SimSettings::default()).unwrap();
        let ab = net.segment("ab").unwrap();
        assert_eq!(net.segment_length(ab), 100.0);
        let legs = net.leg_profiles(ab, Direction::Forward);
        assert_eq!(legs.len(), 1);
        assert_eq!(legs[0].climb_angle, 0.0);
        let bc = net.segment("bc").unwrap();
        assert_eq!(net.segment_length(bc), 50.0);
        let up = net.leg_profiles(bc, Direction::Forward)[0].climb_angle;
        assert!((up - 30f64.atan2(40.0)).abs() < 1e-15);
        assert_eq!(net.leg_profiles(bc, Direction::Reverse)[0].climb_angle, -up);
    }

    #[test]
    fn waypoint_length_matches_independent_sum() {
        let nodes = [
            Node::new("a", Point3::new(0.0, 0.0, 5.0)),
            Node::new("b", Point3::new(90.0, 30.0, 25.0)),
        ];
        let wps = vec![Point3::new(20.0, 10.0, 40.0), Point3::new(60.0, 35.0, 40.0)];
        let seg = Segment::new("s", "a", "b").with_waypoints(wps);
        let net = SkywayNetwork::from_parts(nodes, [seg], SimSettings::default()).unwrap();
        let pts: [[f64; 3]; 4] = [
            [0.0, 0.0, 5.0],
            [20.0, 10.0, 40.0],
            [60.0, 35.0, 40.0],
            [90.0, 30.0, 25.0],
        ];
        let expected: f64 = pts
            .windows(2)
            .map(|w| {
                ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2))
                    .sqrt()
            })
            .sum();
        let seg = net.segment("s").unwrap();
        assert_eq!(net.leg_profiles(seg, Direction::Forward).len(), 3);
        assert!((net.segment_length(seg) - expected).abs() < 1e-9);
    }

    #[test]
    fn invalid_ids_are_reported() {
        let err = SkywayNetwork::from_parts(
            [Node::new("a b", Point3::default())],
            [],
            SimSettings::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("a b"));
    }
}
