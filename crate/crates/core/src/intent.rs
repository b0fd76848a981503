//! Structured intent language: placement clauses over node labels, routing
//! clauses over the network graph, configurations, and the satisfaction
//! predicate tying them to a labeled world.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{realized_path, ControllerState, FlowRule};
use crate::infra::{InfraSnapshot, LabelSet, ReplicaId, VertexKind};
use crate::path::Path;
use crate::placement::ManifestDoc;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntentError {
    #[error("invalid predicate on `{key}`: {reason}")]
    Predicate { key: String, reason: String },
    #[error("invalid placement clause: {0}")]
    Placement(String),
    #[error("invalid routing clause: {0}")]
    Routing(String),
    #[error("intent `{id}` is inconsistent: {reason}")]
    Inconsistent { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateOp {
    Equals,
    NotEquals,
    InSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelPredicate {
    pub key: String,
    pub op: PredicateOp,
    pub values: Vec<String>,
}

impl LabelPredicate {
    pub fn equals(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            op: PredicateOp::Equals,
            values: vec![value.into()],
        }
    }

    pub fn not_equals(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            op: PredicateOp::NotEquals,
            values: vec![value.into()],
        }
    }

    pub fn in_set<I, S>(key: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            key: key.into(),
            op: PredicateOp::InSet,
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        let err = |reason: &str| IntentError::Predicate {
            key: self.key.clone(),
            reason: reason.to_string(),
        };
        if self.key.is_empty() {
            return Err(err("empty key"));
        }
        if self.values.iter().any(|v| v.is_empty()) {
            return Err(err("empty value"));
        }
        match (self.op, self.values.len()) {
            (PredicateOp::InSet, 0) => Err(err("in-set needs at least one value")),
            (PredicateOp::Equals | PredicateOp::NotEquals, n) if n != 1 => {
                Err(err("equals/not-equals take exactly one value"))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the predicate. A missing key fails `equals` and `in-set` and
    /// satisfies `not-equals`.
    pub fn eval(&self, labels: &LabelSet) -> bool {
        eval_predicate(self, labels)
    }
}

impl fmt::Display for LabelPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            PredicateOp::Equals => write!(f, "{}={}", self.key, self.values[0]),
            PredicateOp::NotEquals => write!(f, "{}!={}", self.key, self.values[0]),
            PredicateOp::InSet => write!(f, "{} in {{{}}}", self.key, self.values.join(",")),
        }
    }
}

pub fn eval_predicate(pred: &LabelPredicate, labels: &LabelSet) -> bool {
    let value = labels.get(&pred.key);
    match pred.op {
        PredicateOp::Equals => value == pred.values.first().map(String::as_str),
        PredicateOp::NotEquals => value != pred.values.first().map(String::as_str),
        PredicateOp::InSet => value.is_some_and(|v| pred.values.iter().any(|x| x == v)),
    }
}

pub fn eval_all(preds: &[LabelPredicate], labels: &LabelSet) -> bool {
    preds.iter().all(|p| p.eval(labels))
}

pub(crate) fn display_predicates(preds: &[LabelPredicate]) -> String {
    if preds.is_empty() {
        return "<all>".to_string();
    }
    preds
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" & ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Require,
    Forbid,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementClause {
    #[serde(default)]
    pub workload_selector: Vec<LabelPredicate>,
    pub mode: PlacementMode,
    pub node_predicates: Vec<LabelPredicate>,
}

impl PlacementClause {
    pub fn require(selector: Vec<LabelPredicate>, node_predicates: Vec<LabelPredicate>) -> Self {
        Self {
            workload_selector: selector,
            mode: PlacementMode::Require,
            node_predicates,
        }
    }

    pub fn forbid(selector: Vec<LabelPredicate>, node_predicates: Vec<LabelPredicate>) -> Self {
        Self {
            workload_selector: selector,
            mode: PlacementMode::Forbid,
            node_predicates,
        }
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        if self.node_predicates.is_empty() {
            return Err(IntentError::Placement("node predicates must not be empty".into()));
        }
        if self.mode == PlacementMode::Require && self.workload_selector.is_empty() {
            return Err(IntentError::Placement(
                "require clauses need a workload selector".into(),
            ));
        }
        for p in self.workload_selector.iter().chain(&self.node_predicates) {
            p.validate()?;
        }
        Ok(())
    }

    /// Whether the clause applies to a workload with these labels. An empty
    /// selector applies to every workload.
    pub fn selects(&self, workload_labels: &LabelSet) -> bool {
        eval_all(&self.workload_selector, workload_labels)
    }

    /// Whether a replica of a selected workload may sit on a node with these labels.
    pub fn allows(&self, node_labels: &LabelSet) -> bool {
        let all = eval_all(&self.node_predicates, node_labels);
        match self.mode {
            PlacementMode::Require => all,
            PlacementMode::Forbid => !all,
        }
    }
}

impl fmt::Display for PlacementClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = match self.mode {
            PlacementMode::Require => "only on",
            PlacementMode::Forbid => "never on",
        };
        write!(
            f,
            "[{}] {verb} [{}]",
            display_predicates(&self.workload_selector),
            display_predicates(&self.node_predicates)
        )
    }
}

/// A forbidden-set entry: an explicit device id or a predicate over device labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceSelector {
    Id(String),
    Label(LabelPredicate),
}

impl fmt::Display for DeviceSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Id(id) => f.write_str(id),
            Self::Label(p) => write!(f, "{p}"),
        }
    }
}

/// One routing constraint, field-for-field the constraint document schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingClause {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_port: Option<u32>,
    #[serde(default)]
    pub forbidden: Vec<DeviceSelector>,
    #[serde(default)]
    pub must_go: Vec<String>,
}

impl RoutingClause {
    pub fn between(src: impl Into<String>, dest: impl Into<String>) -> Self {
        Self {
            src: Some(src.into()),
            dest: Some(dest.into()),
            out_port: None,
            forbidden: Vec::new(),
            must_go: Vec::new(),
        }
    }

    pub fn via<I, S>(mut self, waypoints: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.must_go.extend(waypoints.into_iter().map(Into::into));
        self
    }

    pub fn avoiding<I>(mut self, forbidden: I) -> Self
    where
        I: IntoIterator<Item = DeviceSelector>,
    {
        self.forbidden.extend(forbidden);
        self
    }

    /// Structural checks that need no snapshot. Missing endpoints are allowed
    /// here; the validator reports them as a no-op policy.
    pub fn validate(&self) -> Result<(), IntentError> {
        if let (Some(s), Some(d)) = (&self.src, &self.dest) {
            if s == d {
                return Err(IntentError::Routing(format!("src and dest are both `{s}`")));
            }
        }
        for sel in &self.forbidden {
            if let DeviceSelector::Label(p) = sel {
                p.validate()?;
            }
        }
        let ids: BTreeSet<&str> = self
            .forbidden
            .iter()
            .filter_map(|s| match s {
                DeviceSelector::Id(id) => Some(id.as_str()),
                DeviceSelector::Label(_) => None,
            })
            .collect();
        if let Some(w) = self.must_go.iter().find(|w| ids.contains(w.as_str())) {
            return Err(IntentError::Routing(format!(
                "`{w}` is both a waypoint and forbidden"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for RoutingClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {}",
            self.src.as_deref().unwrap_or("?"),
            self.dest.as_deref().unwrap_or("?")
        )?;
        if !self.must_go.is_empty() {
            write!(f, " via [{}]", self.must_go.join(", "))?;
        }
        if !self.forbidden.is_empty() {
            let f_list: Vec<String> = self.forbidden.iter().map(ToString::to_string).collect();
            write!(f, " avoiding [{}]", f_list.join(", "))?;
        }
        if let Some(p) = self.out_port {
            write!(f, " out_port {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Computing,
    Networking,
    Hybrid,
}

impl Domain {
    pub fn from_clause_mix(placement: usize, routing: usize) -> Option<Self> {
        match (placement > 0, routing > 0) {
            (true, true) => Some(Self::Hybrid),
            (true, false) => Some(Self::Computing),
            (false, true) => Some(Self::Networking),
            (false, false) => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Computing => "computing",
            Self::Networking => "networking",
            Self::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Simple,
    Complex,
}

impl Complexity {
    pub fn from_clause_count(n: usize) -> Self {
        if n == 1 {
            Self::Simple
        } else {
            Self::Complex
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Complex => "complex",
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredIntent {
    pub id: String,
    pub domain: Domain,
    pub complexity: Complexity,
    #[serde(default)]
    pub placement_clauses: Vec<PlacementClause>,
    #[serde(default)]
    pub routing_clauses: Vec<RoutingClause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
}

impl StructuredIntent {
    /// Builds an intent whose domain and complexity follow from the clause mix.
    pub fn from_clauses(
        id: impl Into<String>,
        placement_clauses: Vec<PlacementClause>,
        routing_clauses: Vec<RoutingClause>,
        source_text: Option<String>,
    ) -> Result<Self, IntentError> {
        let id = id.into();
        let domain = Domain::from_clause_mix(placement_clauses.len(), routing_clauses.len())
            .ok_or_else(|| IntentError::Inconsistent {
                id: id.clone(),
                reason: "no clauses".into(),
            })?;
        let intent = Self {
            id,
            domain,
            complexity: Complexity::from_clause_count(
                placement_clauses.len() + routing_clauses.len(),
            ),
            placement_clauses,
            routing_clauses,
            source_text,
        };
        intent.validate()?;
        Ok(intent)
    }

    pub fn clause_count(&self) -> usize {
        self.placement_clauses.len() + self.routing_clauses.len()
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        let bad = |reason: String| IntentError::Inconsistent {
            id: self.id.clone(),
            reason,
        };
        let (p, r) = (self.placement_clauses.len(), self.routing_clauses.len());
        match self.domain {
            Domain::Computing if r > 0 => {
                return Err(bad("computing intent carries routing clauses".into()))
            }
            Domain::Networking if p > 0 => {
                return Err(bad("networking intent carries placement clauses".into()))
            }
            Domain::Hybrid if p == 0 || r == 0 => {
                return Err(bad("hybrid intent needs both clause kinds".into()))
            }
            _ => {}
        }
        if self.complexity != Complexity::from_clause_count(p + r) {
            return Err(bad(format!(
                "complexity `{}` does not match {} clause(s)",
                self.complexity,
                p + r
            )));
        }
        for c in &self.placement_clauses {
            c.validate()?;
        }
        for c in &self.routing_clauses {
            c.validate()?;
        }
        Ok(())
    }

    /// Serialization used for exact-match comparisons.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("intent serializes")
    }
}

// ---------------------------------------------------------------------------
// Flows and configurations

/// A concrete directed flow between two graph vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub src: String,
    pub dest: String,
}

impl FlowKey {
    pub fn new(src: impl Into<String>, dest: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dest: dest.into(),
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dest)
    }
}

/// Resolves an endpoint reference to graph vertices: a host or device id
/// stands for itself, a workload id for the hosts of the nodes its replicas
/// currently run on. Unknown references resolve to nothing.
pub fn resolve_endpoint(reference: &str, snapshot: &InfraSnapshot) -> Vec<String> {
    if snapshot.vertex_kind(reference).is_some() {
        return vec![reference.to_string()];
    }
    if snapshot.workload(reference).is_some() {
        let hosts: BTreeSet<String> = snapshot
            .replicas_of(reference)
            .filter_map(|(_, node)| snapshot.host_for_node(node))
            .map(|h| h.id.clone())
            .collect();
        return hosts.into_iter().collect();
    }
    Vec::new()
}

/// Concrete flows a routing clause applies to under the current placements.
pub fn resolve_flows(clause: &RoutingClause, snapshot: &InfraSnapshot) -> Vec<FlowKey> {
    let (Some(src), Some(dest)) = (&clause.src, &clause.dest) else {
        return Vec::new();
    };
    let srcs = resolve_endpoint(src, snapshot);
    let dests = resolve_endpoint(dest, snapshot);
    let mut flows = Vec::new();
    for s in &srcs {
        for d in &dests {
            if s != d {
                flows.push(FlowKey::new(s, d));
            }
        }
    }
    flows
}

/// Expands forbidden selectors to the set of device ids they cover.
pub fn expand_forbidden(selectors: &[DeviceSelector], snapshot: &InfraSnapshot) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for sel in selectors {
        match sel {
            DeviceSelector::Id(id) => {
                out.insert(id.clone());
            }
            DeviceSelector::Label(p) => {
                out.extend(
                    snapshot
                        .devices()
                        .filter(|d| p.eval(&d.labels))
                        .map(|d| d.id.clone()),
                );
            }
        }
    }
    out
}

/// `⟨σ, ρ⟩` plus what was realized from it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub sigma: BTreeMap<ReplicaId, String>,
    pub rho: Vec<RoutingClause>,
    pub realized_flows: Vec<FlowRule>,
    #[serde(default)]
    pub manifests: Vec<ManifestDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseRef {
    Placement(usize),
    Routing(usize),
}

impl fmt::Display for ClauseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Placement(i) => write!(f, "placement[{i}]"),
            Self::Routing(i) => write!(f, "routing[{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Placement,
    Unplaced,
    ForbiddenVertex,
    MissingWaypoint,
    WaypointOrder,
    NoApplicableFlow,
    MissingPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub clause_ref: ClauseRef,
    pub kind: ViolationKind,
    pub subject: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.clause_ref, self.subject, self.reason)
    }
}

/// One violation per replica of a selected workload that sits on a node the
/// clause does not allow (or, for require clauses, is not placed at all).
pub fn satisfies_placement(
    sigma: &BTreeMap<ReplicaId, String>,
    clauses: &[PlacementClause],
    snapshot: &InfraSnapshot,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, clause) in clauses.iter().enumerate() {
        for wl in snapshot.workloads().filter(|w| clause.selects(&w.labels)) {
            for index in 0..wl.replicas {
                let replica = ReplicaId::new(&wl.id, index);
                match sigma.get(&replica) {
                    Some(node_id) => {
                        let Some(node) = snapshot.node(node_id) else {
                            out.push(Violation {
                                clause_ref: ClauseRef::Placement(i),
                                kind: ViolationKind::Placement,
                                subject: replica.to_string(),
                                reason: format!("assigned to unknown node `{node_id}`"),
                            });
                            continue;
                        };
                        if !clause.allows(&node.labels) {
                            out.push(Violation {
                                clause_ref: ClauseRef::Placement(i),
                                kind: ViolationKind::Placement,
                                subject: replica.to_string(),
                                reason: format!("on `{node_id}`, which violates {clause}"),
                            });
                        }
                    }
                    None if clause.mode == PlacementMode::Require => out.push(Violation {
                        clause_ref: ClauseRef::Placement(i),
                        kind: ViolationKind::Unplaced,
                        subject: replica.to_string(),
                        reason: "replica is not placed".into(),
                    }),
                    None => {}
                }
            }
        }
    }
    out
}

/// Checks one realized path against one routing clause.
pub(crate) fn check_path(
    clause_ref: ClauseRef,
    clause: &RoutingClause,
    flow: &FlowKey,
    path: &Path,
    forbidden: &BTreeSet<String>,
    snapshot: &InfraSnapshot,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in &path.vertices {
        if snapshot.vertex_kind(v) == Some(VertexKind::Host) {
            continue;
        }
        if forbidden.contains(v) {
            out.push(Violation {
                clause_ref,
                kind: ViolationKind::ForbiddenVertex,
                subject: v.clone(),
                reason: format!("flow {flow} traverses forbidden `{v}`"),
            });
        }
    }
    let mut cursor: Option<usize> = None;
    for w in &clause.must_go {
        match path.vertices.iter().position(|v| v == w) {
            None => out.push(Violation {
                clause_ref,
                kind: ViolationKind::MissingWaypoint,
                subject: w.clone(),
                reason: format!("flow {flow} does not traverse waypoint `{w}`"),
            }),
            Some(pos) if cursor.is_some_and(|c| pos <= c) => out.push(Violation {
                clause_ref,
                kind: ViolationKind::WaypointOrder,
                subject: w.clone(),
                reason: format!("flow {flow} reaches `{w}` before the preceding waypoint"),
            }),
            Some(pos) => cursor = Some(pos),
        }
    }
    out
}

/// Checks each routing clause against the paths of the flows it resolves to.
/// A clause that resolves to no flow yields a no-op violation.
pub fn satisfies_routing(
    paths: &BTreeMap<FlowKey, Path>,
    clauses: &[RoutingClause],
    snapshot: &InfraSnapshot,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, clause) in clauses.iter().enumerate() {
        let clause_ref = ClauseRef::Routing(i);
        let flows = resolve_flows(clause, snapshot);
        if flows.is_empty() {
            out.push(Violation {
                clause_ref,
                kind: ViolationKind::NoApplicableFlow,
                subject: clause.to_string(),
                reason: "clause matches no concrete flow".into(),
            });
            continue;
        }
        let forbidden = expand_forbidden(&clause.forbidden, snapshot);
        for flow in &flows {
            match paths.get(flow) {
                Some(path) => out.extend(check_path(clause_ref, clause, flow, path, &forbidden, snapshot)),
                None => out.push(Violation {
                    clause_ref,
                    kind: ViolationKind::MissingPath,
                    subject: flow.to_string(),
                    reason: "no realized path for flow".into(),
                }),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "violations", rename_all = "lowercase")]
pub enum Satisfaction {
    Pass,
    Fail(Vec<Violation>),
}

impl Satisfaction {
    pub fn is_pass(&self) -> bool {
        matches!(self, Self::Pass)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Self::Pass => &[],
            Self::Fail(v) => v,
        }
    }
}

/// `C ⊨_λ I`: every placement clause holds for σ and every routing clause
/// holds for the paths induced by the configuration's realized flow rules.
pub fn satisfies(config: &Configuration, intent: &StructuredIntent, snapshot: &InfraSnapshot) -> Satisfaction {
    let mut violations = satisfies_placement(&config.sigma, &intent.placement_clauses, snapshot);

    let controller = ControllerState::for_snapshot(snapshot);
    let controller = controller
        .install(&config.realized_flows)
        .unwrap_or_else(|_| controller.clone());
    let mut paths = BTreeMap::new();
    let mut untraceable = Vec::new();
    for (i, clause) in intent.routing_clauses.iter().enumerate() {
        for flow in resolve_flows(clause, snapshot) {
            if paths.contains_key(&flow) {
                continue;
            }
            match realized_path(&controller, &flow, snapshot) {
                Ok(p) => {
                    paths.insert(flow, p);
                }
                Err(e) => untraceable.push(Violation {
                    clause_ref: ClauseRef::Routing(i),
                    kind: ViolationKind::MissingPath,
                    subject: flow.to_string(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    let routing = satisfies_routing(&paths, &intent.routing_clauses, snapshot);
    // Untraceable flows already show up as MissingPath from satisfies_routing;
    // keep the trace error text instead of the generic one.
    for v in routing {
        if v.kind == ViolationKind::MissingPath {
            if let Some(pos) = untraceable
                .iter()
                .position(|u| u.clause_ref == v.clause_ref && u.subject == v.subject)
            {
                violations.push(untraceable.remove(pos));
                continue;
            }
        }
        violations.push(v);
    }

    if violations.is_empty() {
        Satisfaction::Pass
    } else {
        Satisfaction::Fail(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(pairs: &[(&str, &str)]) -> LabelSet {
        LabelSet::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn path(v: &[&str]) -> Path {
        Path {
            vertices: v.iter().map(|s| s.to_string()).collect(),
            total_weight: 0.0,
        }
    }

    #[test]
    fn predicate_semantics() {
        let w = fixtures::five_worker();
        let w1 = &w.node("worker-1").unwrap().labels;
        let w2 = &w.node("worker-2").unwrap().labels;
        assert!(LabelPredicate::equals("security", "high").eval(w1));
        assert!(!LabelPredicate::equals("zone", "cloud").eval(w2));
        let bare = labels(&[("zone", "edge")]);
        assert!(LabelPredicate::not_equals("provider", "aws").eval(&bare));
        assert!(!LabelPredicate::equals("provider", "aws").eval(&bare));
        assert!(!LabelPredicate::in_set("provider", ["aws"]).eval(&bare));
        assert!(LabelPredicate::in_set("zone", ["cloud", "edge"]).eval(&bare));
    }

    #[test]
    fn predicate_arity() {
        assert!(LabelPredicate::in_set("k", Vec::<String>::new()).validate().is_err());
        let mut p = LabelPredicate::equals("k", "v");
        p.values.push("w".into());
        assert!(p.validate().is_err());
    }

    fn phi_clause() -> PlacementClause {
        PlacementClause::require(
            vec![LabelPredicate::equals("data-type", "phi")],
            vec![LabelPredicate::equals("zone", "cloud")],
        )
    }

    fn sigma(pairs: &[(&str, u32, &str)]) -> BTreeMap<ReplicaId, String> {
        pairs
            .iter()
            .map(|(w, i, n)| (ReplicaId::new(*w, *i), n.to_string()))
            .collect()
    }

    #[test]
    fn placement_examples() {
        let w = fixtures::five_worker();
        let clause = PlacementClause::require(
            vec![LabelPredicate::equals("app", "phi-db")],
            vec![LabelPredicate::equals("zone", "cloud")],
        );
        let ok = sigma(&[("phi-db", 0, "worker-4")]);
        assert!(satisfies_placement(&ok, std::slice::from_ref(&clause), &w).is_empty());
        let bad = sigma(&[("phi-db", 0, "worker-2")]);
        let v = satisfies_placement(&bad, &[clause], &w);
        assert_eq!(v.len(), 1);
        assert!(v[0].reason.contains("worker-2"));
        assert!(satisfies_placement(&bad, &[], &w).is_empty());
    }

    #[test]
    fn forbid_clause_is_negation_of_conjunction() {
        let c = PlacementClause::forbid(
            vec![],
            vec![
                LabelPredicate::equals("zone", "edge"),
                LabelPredicate::equals("provider", "aws"),
            ],
        );
        assert!(!c.allows(&labels(&[("zone", "edge"), ("provider", "aws")])));
        assert!(c.allows(&labels(&[("zone", "edge"), ("provider", "azure")])));
        assert!(c.validate().is_ok());
        assert!(phi_clause().validate().is_ok());
    }

    #[test]
    fn routing_examples() {
        let w = fixtures::five_worker();
        let mut paths = BTreeMap::new();
        paths.insert(FlowKey::new("h2", "h4"), path(&["h2", "s1", "s8", "s4", "h4"]));
        let via = RoutingClause::between("h2", "h4").via(["s8"]);
        assert!(satisfies_routing(&paths, &[via], &w).is_empty());

        let avoid = RoutingClause::between("h2", "h4").avoiding([DeviceSelector::Id("s8".into())]);
        let v = satisfies_routing(&paths, &[avoid], &w);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ForbiddenVertex);
    }

    #[test]
    fn waypoint_order_violation() {
        // h2 s2 s3 s9 s8 s4 h4 is a simple path in the five-worker wiring
        // that reaches s3 before s8.
        let w = fixtures::five_worker();
        let p = path(&["h2", "s2", "s3", "s9", "s8", "s4", "h4"]);
        for pair in p.vertices.windows(2) {
            assert!(w.link_weight(&pair[0], &pair[1]).is_some());
        }
        let mut paths = BTreeMap::new();
        paths.insert(FlowKey::new("h2", "h4"), p);
        let clause = RoutingClause::between("h2", "h4").via(["s8", "s3"]);
        let v = satisfies_routing(&paths, &[clause], &w);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::WaypointOrder);
        assert_eq!(v[0].subject, "s3");
    }

    #[test]
    fn clause_without_endpoints_is_noop() {
        let w = fixtures::five_worker();
        let clause = RoutingClause {
            src: None,
            dest: None,
            out_port: None,
            forbidden: vec![],
            must_go: vec!["s8".into()],
        };
        let v = satisfies_routing(&BTreeMap::new(), &[clause], &w);
        assert_eq!(v[0].kind, ViolationKind::NoApplicableFlow);
    }

    #[test]
    fn label_forbidden_expansion() {
        let w = fixtures::five_worker();
        let set = expand_forbidden(
            &[DeviceSelector::Label(LabelPredicate::equals("mfr", "huawei"))],
            &w,
        );
        assert_eq!(set.into_iter().collect::<Vec<_>>(), ["s3", "s5", "s9"]);
    }

    #[test]
    fn workload_endpoints_follow_placements() {
        let w = fixtures::five_worker();
        assert_eq!(resolve_endpoint("phi-db", &w), ["h2"]);
        let moved = w
            .with_placements([(ReplicaId::new("phi-db", 0), "worker-4".to_string())])
            .unwrap();
        assert_eq!(resolve_endpoint("phi-db", &moved), ["h4"]);
        assert!(resolve_endpoint("nowhere", &w).is_empty());
    }

    #[test]
    fn zero_clause_intent_passes() {
        let w = fixtures::five_worker();
        let intent = StructuredIntent {
            id: "empty".into(),
            domain: Domain::Computing,
            complexity: Complexity::Complex,
            placement_clauses: vec![],
            routing_clauses: vec![],
            source_text: None,
        };
        let cfg = Configuration::default();
        assert!(satisfies(&cfg, &intent, &w).is_pass());
    }

    #[test]
    fn intent_invariants() {
        let ok = StructuredIntent::from_clauses("i", vec![phi_clause()], vec![], None).unwrap();
        assert_eq!(ok.domain, Domain::Computing);
        assert_eq!(ok.complexity, Complexity::Simple);
        let mut bad = ok.clone();
        bad.domain = Domain::Hybrid;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.complexity = Complexity::Complex;
        assert!(bad.validate().is_err());
        assert!(StructuredIntent::from_clauses("e", vec![], vec![], None).is_err());
    }

    #[test]
    fn routing_clause_json_shape() {
        let c = RoutingClause::between("h2", "h4")
            .via(["s8"])
            .avoiding([DeviceSelector::Id("s3".into())]);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"src":"h2","dest":"h4","forbidden":["s3"],"must_go":["s8"]}"#);
        let label = RoutingClause::between("h1", "h5")
            .avoiding([DeviceSelector::Label(LabelPredicate::equals("mfr", "huawei"))]);
        let back: RoutingClause = serde_json::from_str(&serde_json::to_string(&label).unwrap()).unwrap();
        assert_eq!(back, label);
    }
}
