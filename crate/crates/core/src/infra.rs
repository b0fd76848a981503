//! Labeled infrastructure world: compute nodes, network devices, hosts,
//! links, workloads and their placements.
//!
//! An [`InfraSnapshot`] is an immutable value. Every change made by the
//! engine (placing replicas, installing flow rules) produces a new snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowRule;

/// Capacity assumed for nodes whose fixture entry omits it.
pub const DEFAULT_CAPACITY: u32 = 1000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Parse(String),
    #[error("integrity error at `{entity}`: {reason}")]
    Integrity { entity: String, reason: String },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn integrity(entity: impl Into<String>, reason: impl Into<String>) -> TopologyError {
    TopologyError::Integrity {
        entity: entity.into(),
        reason: reason.into(),
    }
}

/// Single-valued label map. Keys are lowercase and non-empty; values are
/// non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(BTreeMap<String, String>);

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a label set, lowercasing keys. Fails on empty keys or values
    /// and on keys that collide once lowercased.
    pub fn from_pairs<K, V, I>(pairs: I) -> Result<Self, String>
    where
        K: AsRef<str>,
        V: Into<String>,
        I: IntoIterator<Item = (K, V)>,
    {
        let mut out = BTreeMap::new();
        for (k, v) in pairs {
            let key = k.as_ref().trim().to_lowercase();
            let value: String = v.into();
            if key.is_empty() {
                return Err("empty label key".into());
            }
            if value.trim().is_empty() {
                return Err(format!("empty value for label `{key}`"));
            }
            if out.insert(key.clone(), value).is_some() {
                return Err(format!("label `{key}` given more than once"));
            }
        }
        Ok(Self(out))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeNode {
    pub id: String,
    pub labels: LabelSet,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDevice {
    pub id: String,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Host {
    pub id: String,
    pub attached_switch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached_node: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

impl Link {
    pub fn touches(&self, v: &str) -> bool {
        self.a == v || self.b == v
    }

    pub fn other(&self, v: &str) -> Option<&str> {
        if self.a == v {
            Some(&self.b)
        } else if self.b == v {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub id: String,
    pub labels: LabelSet,
    pub replicas: u32,
}

/// One replica of a workload, written `workload/index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReplicaId {
    pub workload: String,
    pub index: u32,
}

impl ReplicaId {
    pub fn new(workload: impl Into<String>, index: u32) -> Self {
        Self {
            workload: workload.into(),
            index,
        }
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.workload, self.index)
    }
}

impl FromStr for ReplicaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (workload, index) = s
            .rsplit_once('/')
            .ok_or_else(|| format!("replica id `{s}` is not of the form workload/index"))?;
        let index = index
            .parse()
            .map_err(|_| format!("replica id `{s}` has a non-numeric index"))?;
        if workload.is_empty() {
            return Err(format!("replica id `{s}` has an empty workload"));
        }
        Ok(Self::new(workload, index))
    }
}

impl Serialize for ReplicaId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReplicaId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Kind of a graph vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Device,
    Host,
}

// ---------------------------------------------------------------------------
// Fixture document

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub devices: Vec<DeviceEntry>,
    #[serde(default)]
    pub hosts: Vec<Host>,
    #[serde(default)]
    pub links: Vec<LinkEntry>,
    #[serde(default)]
    pub workloads: Vec<WorkloadEntry>,
    #[serde(default)]
    pub placements: Vec<PlacementEntry>,
    #[serde(default)]
    pub flows: Vec<FlowRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub id: String,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadEntry {
    pub id: String,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default = "one")]
    pub replicas: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementEntry {
    pub replica: ReplicaId,
    pub node: String,
}

// ---------------------------------------------------------------------------
// Snapshot

#[derive(Debug, Clone, PartialEq)]
pub struct InfraSnapshot {
    description: Option<String>,
    nodes: BTreeMap<String, ComputeNode>,
    devices: BTreeMap<String, NetworkDevice>,
    hosts: BTreeMap<String, Host>,
    links: Vec<Link>,
    workloads: BTreeMap<String, Workload>,
    placements: BTreeMap<ReplicaId, String>,
    flows: Vec<FlowRule>,
    adjacency: BTreeMap<String, Vec<(String, f64)>>,
}

impl Default for InfraSnapshot {
    fn default() -> Self {
        Self::from_document(TopologyDocument::default()).expect("empty world is valid")
    }
}

/// Parses a topology document and builds a snapshot from it.
pub fn load_topology(doc: &str) -> Result<InfraSnapshot, TopologyError> {
    let doc: TopologyDocument =
        serde_json::from_str(doc).map_err(|e| TopologyError::Parse(e.to_string()))?;
    InfraSnapshot::from_document(doc)
}

pub fn load_topology_file(path: impl AsRef<Path>) -> Result<InfraSnapshot, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_topology(&text)
}

impl InfraSnapshot {
    pub fn from_document(doc: TopologyDocument) -> Result<Self, TopologyError> {
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let labels = LabelSet::from_pairs(n.labels).map_err(|r| integrity(&n.id, r))?;
            let capacity = n.capacity.unwrap_or(DEFAULT_CAPACITY);
            if capacity == 0 {
                return Err(integrity(&n.id, "capacity must be at least 1"));
            }
            if n.id.is_empty() {
                return Err(integrity("<node>", "empty node id"));
            }
            let node = ComputeNode {
                id: n.id.clone(),
                labels,
                capacity,
            };
            if nodes.insert(n.id.clone(), node).is_some() {
                return Err(integrity(&n.id, "duplicate node id"));
            }
        }

        let mut devices = BTreeMap::new();
        for d in doc.devices {
            let labels = LabelSet::from_pairs(d.labels).map_err(|r| integrity(&d.id, r))?;
            if d.id.is_empty() {
                return Err(integrity("<device>", "empty device id"));
            }
            let dev = NetworkDevice {
                id: d.id.clone(),
                labels,
            };
            if devices.insert(d.id.clone(), dev).is_some() {
                return Err(integrity(&d.id, "duplicate device id"));
            }
        }

        let mut hosts = BTreeMap::new();
        let mut host_of_node: BTreeMap<String, String> = BTreeMap::new();
        for h in doc.hosts {
            if devices.contains_key(&h.id) {
                return Err(integrity(&h.id, "host id collides with a device id"));
            }
            if !devices.contains_key(&h.attached_switch) {
                return Err(integrity(
                    &h.attached_switch,
                    format!("host `{}` attaches to a switch that does not exist", h.id),
                ));
            }
            if let Some(node) = &h.attached_node {
                if !nodes.contains_key(node) {
                    return Err(integrity(
                        node,
                        format!("host `{}` represents a node that does not exist", h.id),
                    ));
                }
                if let Some(other) = host_of_node.insert(node.clone(), h.id.clone()) {
                    return Err(integrity(
                        node,
                        format!("node is represented by both `{other}` and `{}`", h.id),
                    ));
                }
            }
            let id = h.id.clone();
            if hosts.insert(id.clone(), h).is_some() {
                return Err(integrity(id, "duplicate host id"));
            }
        }

        let is_vertex = |v: &str| devices.contains_key(v) || hosts.contains_key(v);
        let mut links = Vec::with_capacity(doc.links.len());
        let mut seen_pairs = BTreeSet::new();
        for l in doc.links {
            for end in [&l.a, &l.b] {
                if !is_vertex(end) {
                    return Err(integrity(end, "link endpoint does not exist"));
                }
            }
            if l.a == l.b {
                return Err(integrity(&l.a, "self-loop link"));
            }
            if hosts.contains_key(&l.a) && hosts.contains_key(&l.b) {
                return Err(integrity(&l.a, format!("host-to-host link to `{}`", l.b)));
            }
            let weight = l.weight.unwrap_or(1.0);
            if !weight.is_finite() || weight < 0.0 {
                return Err(integrity(
                    format!("{}-{}", l.a, l.b),
                    "link weight must be finite and non-negative",
                ));
            }
            let key = if l.a < l.b {
                (l.a.clone(), l.b.clone())
            } else {
                (l.b.clone(), l.a.clone())
            };
            if !seen_pairs.insert(key) {
                return Err(integrity(
                    format!("{}-{}", l.a, l.b),
                    "more than one link between the same pair",
                ));
            }
            links.push(Link {
                a: l.a,
                b: l.b,
                weight,
            });
        }

        for h in hosts.values() {
            let incident: Vec<&Link> = links.iter().filter(|l| l.touches(&h.id)).collect();
            match incident.as_slice() {
                [l] if l.other(&h.id) == Some(h.attached_switch.as_str()) => {}
                [] => {
                    return Err(integrity(
                        &h.id,
                        format!("no access link to `{}`", h.attached_switch),
                    ))
                }
                _ => {
                    return Err(integrity(
                        &h.id,
                        format!("host must have exactly one link, to `{}`", h.attached_switch),
                    ))
                }
            }
        }

        let mut workloads = BTreeMap::new();
        for w in doc.workloads {
            let labels = LabelSet::from_pairs(w.labels).map_err(|r| integrity(&w.id, r))?;
            if !labels.contains_key("app") {
                return Err(integrity(&w.id, "workload labels must include `app`"));
            }
            if w.replicas == 0 {
                return Err(integrity(&w.id, "replicas must be at least 1"));
            }
            if is_vertex(&w.id) {
                return Err(integrity(&w.id, "workload id collides with a vertex id"));
            }
            let wl = Workload {
                id: w.id.clone(),
                labels,
                replicas: w.replicas,
            };
            if workloads.insert(w.id.clone(), wl).is_some() {
                return Err(integrity(&w.id, "duplicate workload id"));
            }
        }

        let mut placements = BTreeMap::new();
        for p in doc.placements {
            let replica = p.replica;
            let wl = workloads
                .get(&replica.workload)
                .ok_or_else(|| integrity(&replica.workload, "placement names an unknown workload"))?;
            if replica.index >= wl.replicas {
                return Err(integrity(replica.to_string(), "replica index out of range"));
            }
            if !nodes.contains_key(&p.node) {
                return Err(integrity(&p.node, "placement names an unknown node"));
            }
            let name = replica.to_string();
            if placements.insert(replica, p.node).is_some() {
                return Err(integrity(name, "replica placed twice"));
            }
        }

        let mut snapshot = Self {
            description: doc.description,
            nodes,
            devices,
            hosts,
            links,
            workloads,
            placements,
            flows: Vec::new(),
            adjacency: BTreeMap::new(),
        };
        snapshot.rebuild_adjacency();
        snapshot.check_capacity()?;

        for rule in &doc.flows {
            let degree = snapshot
                .adjacency
                .get(&rule.switch_id)
                .filter(|_| snapshot.devices.contains_key(&rule.switch_id))
                .ok_or_else(|| integrity(&rule.switch_id, "flow rule on unknown switch"))?
                .len();
            if rule.out_port == 0 || rule.out_port as usize > degree {
                return Err(integrity(
                    &rule.switch_id,
                    format!("flow rule out_port {} has no link", rule.out_port),
                ));
            }
        }
        snapshot.flows = doc.flows;
        Ok(snapshot)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for v in self.devices.keys().chain(self.hosts.keys()) {
            adj.insert(v.clone(), Vec::new());
        }
        for l in &self.links {
            adj.get_mut(&l.a).expect("endpoint").push((l.b.clone(), l.weight));
            adj.get_mut(&l.b).expect("endpoint").push((l.a.clone(), l.weight));
        }
        for list in adj.values_mut() {
            list.sort_by(|x, y| x.0.cmp(&y.0));
        }
        self.adjacency = adj;
    }

    fn check_capacity(&self) -> Result<(), TopologyError> {
        for (node, load) in self.node_loads() {
            let cap = self.nodes[&node].capacity;
            if load > cap {
                return Err(integrity(
                    node,
                    format!("{load} replicas exceed capacity {cap}"),
                ));
            }
        }
        Ok(())
    }

    /// Serializes back to the fixture document form.
    pub fn to_document(&self) -> TopologyDocument {
        let to_map = |l: &LabelSet| {
            l.iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect::<BTreeMap<_, _>>()
        };
        TopologyDocument {
            description: self.description.clone(),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeEntry {
                    id: n.id.clone(),
                    labels: to_map(&n.labels),
                    capacity: Some(n.capacity),
                })
                .collect(),
            devices: self
                .devices
                .values()
                .map(|d| DeviceEntry {
                    id: d.id.clone(),
                    labels: to_map(&d.labels),
                })
                .collect(),
            hosts: self.hosts.values().cloned().collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkEntry {
                    a: l.a.clone(),
                    b: l.b.clone(),
                    weight: Some(l.weight),
                })
                .collect(),
            workloads: self
                .workloads
                .values()
                .map(|w| WorkloadEntry {
                    id: w.id.clone(),
                    labels: to_map(&w.labels),
                    replicas: w.replicas,
                })
                .collect(),
            placements: self
                .placements
                .iter()
                .map(|(r, n)| PlacementEntry {
                    replica: r.clone(),
                    node: n.clone(),
                })
                .collect(),
            flows: self.flows.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ComputeNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&ComputeNode> {
        self.nodes.get(id)
    }

    pub fn devices(&self) -> impl Iterator<Item = &NetworkDevice> {
        self.devices.values()
    }

    pub fn device(&self, id: &str) -> Option<&NetworkDevice> {
        self.devices.get(id)
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.hosts.values()
    }

    pub fn host(&self, id: &str) -> Option<&Host> {
        self.hosts.get(id)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn workloads(&self) -> impl Iterator<Item = &Workload> {
        self.workloads.values()
    }

    pub fn workload(&self, id: &str) -> Option<&Workload> {
        self.workloads.get(id)
    }

    pub fn placements(&self) -> &BTreeMap<ReplicaId, String> {
        &self.placements
    }

    pub fn flows(&self) -> &[FlowRule] {
        &self.flows
    }

    pub fn vertex_kind(&self, v: &str) -> Option<VertexKind> {
        if self.devices.contains_key(v) {
            Some(VertexKind::Device)
        } else if self.hosts.contains_key(v) {
            Some(VertexKind::Host)
        } else {
            None
        }
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.adjacency.contains_key(v)
    }

    /// All vertex ids (devices and hosts) in sorted order.
    pub fn vertices(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    /// Neighbors of `v` sorted by id, with link weights.
    pub fn neighbors(&self, v: &str) -> Result<&[(String, f64)], TopologyError> {
        self.adjacency
            .get(v)
            .map(Vec::as_slice)
            .ok_or_else(|| TopologyError::UnknownVertex(v.to_string()))
    }

    pub fn link_weight(&self, a: &str, b: &str) -> Option<f64> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| n == b)
            .map(|(_, w)| *w)
    }

    /// The host representing a compute node, if any.
    pub fn host_for_node(&self, node: &str) -> Option<&Host> {
        self.hosts
            .values()
            .find(|h| h.attached_node.as_deref() == Some(node))
    }

    /// Replica count per node, over nodes that host at least one replica.
    pub fn node_loads(&self) -> BTreeMap<String, u32> {
        let mut loads = BTreeMap::new();
        for node in self.placements.values() {
            *loads.entry(node.clone()).or_insert(0) += 1;
        }
        loads
    }

    pub fn replicas_of<'a>(&'a self, workload: &'a str) -> impl Iterator<Item = (&'a ReplicaId, &'a str)> + 'a {
        self.placements
            .iter()
            .filter(move |(r, _)| r.workload == workload)
            .map(|(r, n)| (r, n.as_str()))
    }

    /// Returns a new snapshot with the given replicas moved (or newly placed).
    pub fn with_placements<I>(&self, assignments: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (ReplicaId, String)>,
    {
        let mut next = self.clone();
        for (replica, node) in assignments {
            let wl = next
                .workloads
                .get(&replica.workload)
                .ok_or_else(|| integrity(&replica.workload, "unknown workload"))?;
            if replica.index >= wl.replicas {
                return Err(integrity(replica.to_string(), "replica index out of range"));
            }
            if !next.nodes.contains_key(&node) {
                return Err(integrity(&node, "unknown node"));
            }
            next.placements.insert(replica, node);
        }
        next.check_capacity()?;
        Ok(next)
    }

    /// Returns a new snapshot with every link incident to `v` removed.
    pub fn without_links_of(&self, v: &str) -> Self {
        let mut next = self.clone();
        next.links.retain(|l| !l.touches(v));
        next.rebuild_adjacency();
        next
    }

    /// Returns a new snapshot carrying the given installed flow rules.
    pub fn with_flows(&self, flows: Vec<FlowRule>) -> Self {
        let mut next = self.clone();
        next.flows = flows;
        next
    }

    /// Sorted label keys used by any compute node.
    pub fn node_label_keys(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .flat_map(|n| n.labels.iter().map(|(k, _)| k))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Condensed state summary

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateScope {
    Compute,
    Network,
    Both,
}

impl StateScope {
    pub fn covers_compute(self) -> bool {
        matches!(self, Self::Compute | Self::Both)
    }

    pub fn covers_network(self) -> bool {
        matches!(self, Self::Network | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub id: String,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntrySummary {
    pub id: String,
    pub labels: LabelSet,
    pub replicas: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSummary {
    pub replica: ReplicaId,
    pub node: String,
}

/// The condensed world view handed to interpreters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub scope: StateScope,
    #[serde(default)]
    pub nodes: Vec<LabeledEntry>,
    #[serde(default)]
    pub workloads: Vec<WorkloadEntrySummary>,
    #[serde(default)]
    pub placements: Vec<PlacementSummary>,
    #[serde(default)]
    pub devices: Vec<LabeledEntry>,
    #[serde(default)]
    pub hosts: Vec<Host>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default)]
    pub flows: Vec<FlowRule>,
}

/// Condenses a snapshot to the parts covered by `scope`, sorted by id.
pub fn condense(snapshot: &InfraSnapshot, scope: StateScope) -> SnapshotSummary {
    let mut summary = SnapshotSummary {
        scope,
        nodes: Vec::new(),
        workloads: Vec::new(),
        placements: Vec::new(),
        devices: Vec::new(),
        hosts: Vec::new(),
        links: Vec::new(),
        flows: Vec::new(),
    };
    if scope.covers_compute() {
        summary.nodes = snapshot
            .nodes()
            .map(|n| LabeledEntry {
                id: n.id.clone(),
                labels: n.labels.clone(),
            })
            .collect();
        summary.workloads = snapshot
            .workloads()
            .map(|w| WorkloadEntrySummary {
                id: w.id.clone(),
                labels: w.labels.clone(),
                replicas: w.replicas,
            })
            .collect();
        summary.placements = snapshot
            .placements()
            .iter()
            .map(|(r, n)| PlacementSummary {
                replica: r.clone(),
                node: n.clone(),
            })
            .collect();
    }
    if scope.covers_network() {
        summary.devices = snapshot
            .devices()
            .map(|d| LabeledEntry {
                id: d.id.clone(),
                labels: d.labels.clone(),
            })
            .collect();
        summary.hosts = snapshot.hosts().cloned().collect();
        let mut links: Vec<Link> = snapshot
            .links()
            .iter()
            .map(|l| {
                let (a, b) = if l.a <= l.b {
                    (l.a.clone(), l.b.clone())
                } else {
                    (l.b.clone(), l.a.clone())
                };
                Link {
                    a,
                    b,
                    weight: l.weight,
                }
            })
            .collect();
        links.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        summary.links = links;
        let mut flows = snapshot.flows().to_vec();
        flows.sort();
        summary.flows = flows;
    }
    summary
}

impl SnapshotSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }

    /// Drops the parts not covered by `scope`.
    pub fn restrict(&self, scope: StateScope) -> SnapshotSummary {
        let mut out = self.clone();
        out.scope = scope;
        if !scope.covers_compute() {
            out.nodes.clear();
            out.workloads.clear();
            out.placements.clear();
        }
        if !scope.covers_network() {
            out.devices.clear();
            out.hosts.clear();
            out.links.clear();
            out.flows.clear();
        }
        out
    }

    pub fn node_label_values(&self, key: &str) -> BTreeSet<&str> {
        self.nodes.iter().filter_map(|n| n.labels.get(key)).collect()
    }

    pub fn device_label_values(&self, key: &str) -> BTreeSet<&str> {
        self.devices.iter().filter_map(|d| d.labels.get(key)).collect()
    }

    pub fn workload_label_values(&self, key: &str) -> BTreeSet<&str> {
        self.workloads
            .iter()
            .filter_map(|w| w.labels.get(key))
            .collect()
    }

    pub fn has_node_label_key(&self, key: &str) -> bool {
        self.nodes.iter().any(|n| n.labels.contains_key(key))
    }

    pub fn has_device_label_key(&self, key: &str) -> bool {
        self.devices.iter().any(|d| d.labels.contains_key(key))
    }

    pub fn has_workload_label_key(&self, key: &str) -> bool {
        self.workloads.iter().any(|w| w.labels.contains_key(key))
    }

    pub fn has_device(&self, id: &str) -> bool {
        self.devices.iter().any(|d| d.id == id)
    }

    pub fn has_host(&self, id: &str) -> bool {
        self.hosts.iter().any(|h| h.id == id)
    }

    pub fn has_workload(&self, id: &str) -> bool {
        self.workloads.iter().any(|w| w.id == id)
    }

    pub fn device(&self, id: &str) -> Option<&LabeledEntry> {
        self.devices.iter().find(|d| d.id == id)
    }
}
