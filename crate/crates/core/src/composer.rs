//! Energy-optimal service composition and the built-in controllers.
//!
//! Paths are ranked by total flight energy, then by segment count, then by
//! the lexicographic sequence of segment ids, which makes the optimum unique.
//! A segment is usable when it is available in the query's snapshot and a
//! full battery (less the reserve) covers it; every node is assumed to offer
//! a recharge.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use thiserror::Error;

use crate::energy::{segment_energy, EnergyError};
use crate::engine::DeliveryRequest;
use crate::model::{network_from_value, Direction, SkywayNetwork};
use crate::protocol::{Action, Arrival, Controller, Decision, Message, PROTOCOL_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionQuery {
    pub availability: BTreeMap<String, bool>,
    pub current: String,
    pub destination: String,
    pub payload_kg: f64,
    pub usable_capacity_wh: f64,
}

impl CompositionQuery {
    /// Query against the network's own availability flags.
    pub fn new(
        net: &SkywayNetwork,
        current: impl Into<String>,
        destination: impl Into<String>,
        payload_kg: f64,
    ) -> Self {
        let s = &net.settings;
        Self {
            availability: net.availability(),
            current: current.into(),
            destination: destination.into(),
            payload_kg,
            usable_capacity_wh: s.drone.battery_capacity_wh * (1.0 - s.reserve_fraction),
        }
    }

    pub fn with_availability(mut self, availability: BTreeMap<String, bool>) -> Self {
        self.availability = availability;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub segment: String,
    pub direction: Direction,
    pub from: String,
    pub to: String,
    pub energy_wh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPath {
    pub steps: Vec<PathStep>,
    pub total_energy_wh: f64,
}

impl ComposedPath {
    pub fn segment_ids(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.segment.as_str()).collect()
    }

    pub fn nodes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.steps.iter().map(|s| s.from.as_str()).collect();
        if let Some(last) = self.steps.last() {
            out.push(&last.to);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("no feasible path from \"{from}\" to \"{to}\"")]
    NoPath { from: String, to: String },
    #[error("unknown node \"{0}\"")]
    UnknownNode(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// A directed, feasible use of one segment.
#[derive(Debug, Clone)]
struct Arc {
    /// Position of the segment id in sorted order; comparing ranks compares ids.
    rank: usize,
    segment: String,
    direction: Direction,
    from: usize,
    to: usize,
    energy: f64,
}

struct Graph {
    node_ids: Vec<String>,
    out: Vec<Vec<Arc>>,
    source: usize,
    target: usize,
}

fn build_graph(net: &SkywayNetwork, query: &CompositionQuery) -> Result<Graph, ComposeError> {
    if query.usable_capacity_wh.is_nan() || query.usable_capacity_wh <= 0.0 {
        return Err(ComposeError::InvalidQuery(format!(
            "usable capacity {} must be positive",
            query.usable_capacity_wh
        )));
    }
    let node_ids: Vec<String> = net.nodes().map(|n| n.id.clone()).collect();
    let index: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let source = *index
        .get(query.current.as_str())
        .ok_or_else(|| ComposeError::UnknownNode(query.current.clone()))?;
    let target = *index
        .get(query.destination.as_str())
        .ok_or_else(|| ComposeError::UnknownNode(query.destination.clone()))?;

    let s = &net.settings;
    let mut out = vec![Vec::new(); node_ids.len()];
    for (rank, seg) in net.segments().enumerate() {
        if !query.availability.get(&seg.id).copied().unwrap_or(false) {
            continue;
        }
        for direction in [Direction::Forward, Direction::Reverse] {
            let legs = net.leg_profiles(seg, direction);
            let energy = segment_energy(
                &s.drone,
                &s.environment,
                &legs,
                query.payload_kg,
                s.hover_times(),
            )?;
            if energy > query.usable_capacity_wh {
                continue;
            }
            let (a, b) = seg.endpoints(direction);
            out[index[a]].push(Arc {
                rank,
                segment: seg.id.clone(),
                direction,
                from: index[a],
                to: index[b],
                energy,
            });
        }
    }
    Ok(Graph {
        node_ids,
        out,
        source,
        target,
    })
}

/// Ranking key of a partial path.
#[derive(Debug, Clone, PartialEq)]
struct Key {
    energy: f64,
    ranks: Vec<usize>,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then_with(|| self.ranks.len().cmp(&other.ranks.len()))
            .then_with(|| self.ranks.cmp(&other.ranks))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn materialize(graph: &Graph, arcs: &[&Arc]) -> ComposedPath {
    let mut total = 0.0;
    let steps = arcs
        .iter()
        .map(|a| {
            total += a.energy;
            PathStep {
                segment: a.segment.clone(),
                direction: a.direction,
                from: graph.node_ids[a.from].clone(),
                to: graph.node_ids[a.to].clone(),
                energy_wh: a.energy,
            }
        })
        .collect();
    ComposedPath {
        steps,
        total_energy_wh: total,
    }
}

/// Minimum-energy feasible path by label setting with the lexicographic tie-break.
pub fn compose_min_energy(
    net: &SkywayNetwork,
    query: &CompositionQuery,
) -> Result<ComposedPath, ComposeError> {
    let graph = build_graph(net, query)?;
    let n = graph.node_ids.len();

    // best[v]: current label and the arcs realising it
    let mut best: Vec<Option<(Key, Vec<&Arc>)>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[graph.source] = Some((
        Key {
            energy: 0.0,
            ranks: Vec::new(),
        },
        Vec::new(),
    ));
    heap.push(Reverse((
        Key {
            energy: 0.0,
            ranks: Vec::new(),
        },
        graph.source,
    )));

    while let Some(Reverse((key, u))) = heap.pop() {
        if settled[u] {
            continue;
        }
        match &best[u] {
            Some((k, _)) if *k == key => {}
            _ => continue,
        }
        settled[u] = true;
        if u == graph.target {
            break;
        }
        let (base, path) = best[u].clone().expect("settled node has a label");
        for arc in &graph.out[u] {
            if settled[arc.to] {
                continue;
            }
            let mut ranks = base.ranks.clone();
            ranks.push(arc.rank);
            let cand = Key {
                energy: base.energy + arc.energy,
                ranks,
            };
            let better = match &best[arc.to] {
                None => true,
                Some((k, _)) => cand < *k,
            };
            if better {
                let mut p = path.clone();
                p.push(arc);
                best[arc.to] = Some((cand.clone(), p));
                heap.push(Reverse((cand, arc.to)));
            }
        }
    }

    match &best[graph.target] {
        Some((_, arcs)) if settled[graph.target] => Ok(materialize(&graph, arcs)),
        _ => Err(ComposeError::NoPath {
            from: query.current.clone(),
            to: query.destination.clone(),
        }),
    }
}

/// Every feasible simple path from `current` to `destination`, in discovery order.
pub fn enumerate_simple_paths(
    net: &SkywayNetwork,
    query: &CompositionQuery,
) -> Result<Vec<ComposedPath>, ComposeError> {
    let graph = build_graph(net, query)?;
    let mut found = Vec::new();
    let mut on_path = vec![false; graph.node_ids.len()];
    let mut stack: Vec<&Arc> = Vec::new();

    fn dfs<'g>(
        graph: &'g Graph,
        u: usize,
        on_path: &mut [bool],
        stack: &mut Vec<&'g Arc>,
        found: &mut Vec<ComposedPath>,
    ) {
        if u == graph.target {
            found.push(materialize(graph, stack));
            return;
        }
        on_path[u] = true;
        for arc in &graph.out[u] {
            if !on_path[arc.to] {
                stack.push(arc);
                dfs(graph, arc.to, on_path, stack, found);
                stack.pop();
            }
        }
        on_path[u] = false;
    }

    dfs(&graph, graph.source, &mut on_path, &mut stack, &mut found);
    Ok(found)
}

/// Exhaustive reference for [`compose_min_energy`]. Exponential; test use only.
pub fn brute_force_min_energy(
    net: &SkywayNetwork,
    query: &CompositionQuery,
) -> Result<ComposedPath, ComposeError> {
    let rank: HashMap<String, usize> = net
        .segments()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect();
    let key = |p: &ComposedPath| {
        let mut energy = 0.0;
        for s in &p.steps {
            energy += s.energy_wh;
        }
        Key {
            energy,
            ranks: p.steps.iter().map(|s| rank[&s.segment]).collect(),
        }
    };
    enumerate_simple_paths(net, query)?
        .into_iter()
        .min_by(|a, b| key(a).cmp(&key(b)))
        .ok_or_else(|| ComposeError::NoPath {
            from: query.current.clone(),
            to: query.destination.clone(),
        })
}

/// How long the built-in controllers back off when no route exists.
pub const RETRY_WAIT_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    Greedy,
    Static,
}

/// Built-in controller.
///
/// The greedy variant recomposes the minimum-energy route at every arrival,
/// charges just enough (plus reserve) for the next segment, and waits when no
/// route exists. The static variant composes once per request at the origin
/// and keeps following that plan, backing off after any rejection.
#[derive(Debug, Clone)]
pub struct GreedyController {
    policy: Policy,
    network: Option<SkywayNetwork>,
    requests: BTreeMap<String, DeliveryRequest>,
    plans: BTreeMap<String, ComposedPath>,
    just_rejected: bool,
}

impl GreedyController {
    pub fn greedy() -> Self {
        Self::with_policy(Policy::Greedy)
    }

    /// Composes once per request and never adapts.
    pub fn fixed_plan() -> Self {
        Self::with_policy(Policy::Static)
    }

    fn with_policy(policy: Policy) -> Self {
        Self {
            policy,
            network: None,
            requests: BTreeMap::new(),
            plans: BTreeMap::new(),
            just_rejected: false,
        }
    }

    /// `"greedy"` or `"static"`.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "greedy" => Some(Self::greedy()),
            "static" => Some(Self::fixed_plan()),
            _ => None,
        }
    }

    fn decide(&mut self, arrival: &Arrival) -> Action {
        let rejected = std::mem::take(&mut self.just_rejected);
        let (Some(net), Some(req)) = (&self.network, self.requests.get(&arrival.request_id)) else {
            return Action::Wait {
                duration_s: RETRY_WAIT_S,
            };
        };
        if arrival.node_id == req.destination {
            return Action::Complete;
        }
        let reserve = net.settings.reserve_fraction;
        let query = CompositionQuery::new(net, &arrival.node_id, &req.destination, arrival.payload_kg)
            .with_availability(arrival.availability.clone());

        let step = match self.policy {
            Policy::Greedy => match compose_min_energy(net, &query) {
                Ok(path) => path.steps.into_iter().next(),
                Err(_) => None,
            },
            Policy::Static => {
                if rejected {
                    return Action::Wait {
                        duration_s: RETRY_WAIT_S,
                    };
                }
                if !self.plans.contains_key(&req.id) {
                    if let Ok(path) = compose_min_energy(net, &query) {
                        self.plans.insert(req.id.clone(), path);
                    }
                }
                self.plans
                    .get(&req.id)
                    .and_then(|p| p.steps.iter().find(|s| s.from == arrival.node_id).cloned())
            }
        };

        match step {
            None => Action::Wait {
                duration_s: RETRY_WAIT_S,
            },
            Some(step) => {
                let required = step.energy_wh * (1.0 + reserve);
                if arrival.soc_wh < required {
                    Action::Charge {
                        target_wh: required,
                    }
                } else {
                    Action::Traverse {
                        segment: step.segment,
                    }
                }
            }
        }
    }
}

impl Controller for GreedyController {
    fn handle(&mut self, msg: &Message) -> Option<Message> {
        match msg {
            Message::Hello {
                network, requests, ..
            } => {
                self.network = network_from_value(network.clone()).ok();
                self.requests = requests.iter().map(|r| (r.id.clone(), r.clone())).collect();
                self.plans.clear();
                Some(Message::Ready {
                    protocol_version: PROTOCOL_VERSION,
                })
            }
            Message::Arrival(a) => {
                let action = self.decide(a);
                Some(Message::Decision(Decision::answering(a, action)))
            }
            Message::Rejection { .. } => {
                self.just_rejected = true;
                None
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Node, Point3, Segment, SimSettings};

    fn k4() -> SkywayNetwork {
        let pts = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)];
        let nodes = pts
            .iter()
            .enumerate()
            .map(|(i, (x, y))| Node::new(format!("n{i}"), Point3::new(*x, *y, 10.0)));
        let mut segs = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                segs.push(Segment::new(format!("s{a}{b}"), format!("n{a}"), format!("n{b}")));
            }
        }
        SkywayNetwork::from_parts(nodes, segs, SimSettings::default()).unwrap()
    }

    #[test]
    fn same_node_is_empty_path() {
        let net = k4();
        let p = compose_min_energy(&net, &CompositionQuery::new(&net, "n1", "n1", 0.0)).unwrap();
        assert!(p.steps.is_empty());
        assert_eq!(p.total_energy_wh, 0.0);
    }

    #[test]
    fn k4_has_five_simple_paths() {
        let net = k4();
        let q = CompositionQuery::new(&net, "n0", "n2", 0.0);
        assert_eq!(enumerate_simple_paths(&net, &q).unwrap().len(), 5);
    }

    #[test]
    fn single_segment_network() {
        let net = SkywayNetwork::from_parts(
            [
                Node::new("a", Point3::new(0.0, 0.0, 0.0)),
                Node::new("b", Point3::new(50.0, 0.0, 0.0)),
            ],
            [Segment::new("only", "a", "b")],
            SimSettings::default(),
        )
        .unwrap();
        let q = CompositionQuery::new(&net, "b", "a", 1.0);
        let p = brute_force_min_energy(&net, &q).unwrap();
        assert_eq!(p.segment_ids(), vec!["only"]);
        assert_eq!(p.steps[0].direction, Direction::Reverse);
        assert_eq!(compose_min_energy(&net, &q).unwrap(), p);
    }

    #[test]
    fn disconnected_is_no_path() {
        let net = SkywayNetwork::from_parts(
            [
                Node::new("a", Point3::new(0.0, 0.0, 0.0)),
                Node::new("b", Point3::new(50.0, 0.0, 0.0)),
                Node::new("c", Point3::new(0.0, 50.0, 0.0)),
                Node::new("d", Point3::new(50.0, 50.0, 0.0)),
            ],
            [Segment::new("ab", "a", "b"), Segment::new("cd", "c", "d")],
            SimSettings::default(),
        )
        .unwrap();
        let q = CompositionQuery::new(&net, "a", "d", 0.0);
        assert!(matches!(compose_min_energy(&net, &q), Err(ComposeError::NoPath { .. })));
        assert!(matches!(brute_force_min_energy(&net, &q), Err(ComposeError::NoPath { .. })));
    }

    #[test]
    fn equal_energy_prefers_fewer_then_smaller_ids() {
        // Square: n0→n2 via n1 or via n3 cost the same; the diagonal is absent.
        let mut net = k4();
        net.remove_segment("s02").unwrap();
        net.remove_segment("s13").unwrap();
        let q = CompositionQuery::new(&net, "n0", "n2", 0.0);
        let p = compose_min_energy(&net, &q).unwrap();
        assert_eq!(p.segment_ids(), vec!["s01", "s12"]);
        assert_eq!(brute_force_min_energy(&net, &q).unwrap(), p);
    }

    #[test]
    fn infeasible_segment_is_skipped() {
        let mut net = k4();
        net.settings.drone.battery_capacity_wh = 1.0;
        let q = CompositionQuery::new(&net, "n0", "n2", 2.0);
        assert!(matches!(compose_min_energy(&net, &q), Err(ComposeError::NoPath { .. })));
    }
}
