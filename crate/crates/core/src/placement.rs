//! Placement clauses to scheduling directives, a min-max load scheduler, and
//! Deployment-style manifests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infra::{InfraSnapshot, LabelSet, ReplicaId, TopologyError};
use crate::intent::{display_predicates, eval_all, LabelPredicate, PlacementClause, PlacementMode, PredicateOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("unenforceable: no workload matches {0}")]
    NoMatchingWorkload(String),
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("no node satisfies the constraints for `{0}`")]
    Infeasible(String),
    #[error("not enough node capacity to place `{0}`")]
    CapacityExhausted(String),
    #[error("applying placements failed: {0}")]
    Apply(String),
}

/// Everything the scheduler needs to know about one workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementDirective {
    pub workload_id: String,
    pub required_node_predicates: Vec<LabelPredicate>,
    /// Each inner list is one forbidden conjunction.
    pub anti_predicates: Vec<Vec<LabelPredicate>>,
    pub replica_count: u32,
}

impl PlacementDirective {
    pub fn admits(&self, node_labels: &LabelSet) -> bool {
        eval_all(&self.required_node_predicates, node_labels)
            && self.anti_predicates.iter().all(|set| !eval_all(set, node_labels))
    }
}

/// Groups clauses by the workloads they select. A clause whose selector
/// matches nothing makes the whole intent unenforceable.
pub fn compile_placement(
    clauses: &[PlacementClause],
    snapshot: &InfraSnapshot,
) -> Result<Vec<PlacementDirective>, PlacementError> {
    let label_keys = snapshot.node_label_keys();
    let mut by_workload: BTreeMap<String, PlacementDirective> = BTreeMap::new();
    for clause in clauses {
        if let Some(p) = clause
            .node_predicates
            .iter()
            .find(|p| !label_keys.contains(p.key.as_str()))
        {
            return Err(PlacementError::UnknownLabel(p.key.clone()));
        }
        let selected: Vec<_> = snapshot.workloads().filter(|w| clause.selects(&w.labels)).collect();
        if selected.is_empty() {
            return Err(PlacementError::NoMatchingWorkload(display_predicates(
                &clause.workload_selector,
            )));
        }
        for wl in selected {
            let d = by_workload
                .entry(wl.id.clone())
                .or_insert_with(|| PlacementDirective {
                    workload_id: wl.id.clone(),
                    required_node_predicates: Vec::new(),
                    anti_predicates: Vec::new(),
                    replica_count: wl.replicas,
                });
            match clause.mode {
                PlacementMode::Require => {
                    for p in &clause.node_predicates {
                        if !d.required_node_predicates.contains(p) {
                            d.required_node_predicates.push(p.clone());
                        }
                    }
                }
                PlacementMode::Forbid => {
                    if !d.anti_predicates.contains(&clause.node_predicates) {
                        d.anti_predicates.push(clause.node_predicates.clone());
                    }
                }
            }
        }
    }
    Ok(by_workload.into_values().collect())
}

pub fn feasible_nodes(directive: &PlacementDirective, snapshot: &InfraSnapshot) -> BTreeSet<String> {
    snapshot
        .nodes()
        .filter(|n| directive.admits(&n.labels))
        .map(|n| n.id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub assignments: BTreeMap<ReplicaId, String>,
    /// Load of every node after scheduling, including replicas not moved.
    pub per_node_load: BTreeMap<String, u32>,
    pub max_load: u32,
}

/// Assigns every replica of every directive to a feasible node, minimizing the
/// maximum node load. Replicas not covered by a directive stay where they are
/// and count toward load.
pub fn schedule(directives: &[PlacementDirective], snapshot: &InfraSnapshot) -> Result<ScheduleResult, PlacementError> {
    let nodes: Vec<_> = snapshot.nodes().collect();
    let node_index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();

    let moving: BTreeSet<&str> = directives.iter().map(|d| d.workload_id.as_str()).collect();
    let mut base = vec![0u32; nodes.len()];
    for (replica, node) in snapshot.placements() {
        if !moving.contains(replica.workload.as_str()) {
            if let Some(&i) = node_index.get(node.as_str()) {
                base[i] += 1;
            }
        }
    }

    let mut replicas: Vec<(ReplicaId, Vec<usize>)> = Vec::new();
    for d in directives {
        let feasible: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| d.admits(&n.labels))
            .map(|(i, _)| i)
            .collect();
        if feasible.is_empty() {
            return Err(PlacementError::Infeasible(d.workload_id.clone()));
        }
        for index in 0..d.replica_count {
            replicas.push((ReplicaId::new(&d.workload_id, index), feasible.clone()));
        }
    }
    replicas.sort_by(|a, b| a.0.cmp(&b.0));
    let feasible: Vec<Vec<usize>> = replicas.iter().map(|(_, f)| f.clone()).collect();

    let capacity: Vec<u32> = nodes
        .iter()
        .zip(&base)
        .map(|(n, b)| n.capacity.saturating_sub(*b))
        .collect();
    if max_matching(&feasible, &capacity) < feasible.len() {
        let stuck = first_unplaceable(&feasible, &capacity)
            .map(|i| replicas[i].0.workload.clone())
            .unwrap_or_default();
        return Err(PlacementError::CapacityExhausted(stuck));
    }

    // Smallest achievable max load.
    let floor = base.iter().copied().max().unwrap_or(0);
    let caps_under = |limit: u32| -> Vec<u32> {
        nodes
            .iter()
            .zip(&base)
            .map(|(n, b)| n.capacity.min(limit).saturating_sub(*b))
            .collect()
    };
    let mut limit = floor;
    while max_matching(&feasible, &caps_under(limit)) < feasible.len() {
        limit += 1;
    }

    // Deterministic assignment: replicas in id order, least-loaded node first
    // (ties by node id), keeping the rest schedulable under `limit`.
    let mut load = base.clone();
    let mut chosen = vec![usize::MAX; replicas.len()];
    for r in 0..replicas.len() {
        let mut candidates = feasible[r].clone();
        candidates.sort_by(|&a, &b| load[a].cmp(&load[b]).then(nodes[a].id.cmp(&nodes[b].id)));
        let pick = candidates.into_iter().find(|&n| {
            if load[n] + 1 > limit.min(nodes[n].capacity) {
                return false;
            }
            load[n] += 1;
            let rest_caps: Vec<u32> = nodes
                .iter()
                .zip(&load)
                .map(|(node, l)| node.capacity.min(limit).saturating_sub(*l))
                .collect();
            let ok = max_matching(&feasible[r + 1..], &rest_caps) == feasible.len() - r - 1;
            load[n] -= 1;
            ok
        });
        let n = pick.expect("limit is feasible by construction");
        load[n] += 1;
        chosen[r] = n;
    }

    let assignments = replicas
        .iter()
        .zip(&chosen)
        .map(|((id, _), &n)| (id.clone(), nodes[n].id.clone()))
        .collect();
    let per_node_load: BTreeMap<String, u32> = nodes.iter().zip(&load).map(|(n, l)| (n.id.clone(), *l)).collect();
    let max_load = load.iter().copied().max().unwrap_or(0);
    Ok(ScheduleResult {
        assignments,
        per_node_load,
        max_load,
    })
}

/// Size of a maximum assignment of items to bins, where item `i` may go to
/// any bin in `options[i]` and bin `b` holds at most `caps[b]` items.
fn max_matching(options: &[Vec<usize>], caps: &[u32]) -> usize {
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); caps.len()];
    let mut matched = 0;
    for item in 0..options.len() {
        let mut seen = vec![false; caps.len()];
        if augment(item, options, caps, &mut holders, &mut seen) {
            matched += 1;
        }
    }
    matched
}

fn augment(item: usize, options: &[Vec<usize>], caps: &[u32], holders: &mut [Vec<usize>], seen: &mut [bool]) -> bool {
    for &bin in &options[item] {
        if seen[bin] {
            continue;
        }
        seen[bin] = true;
        if holders[bin].len() < caps[bin] as usize {
            holders[bin].push(item);
            return true;
        }
        for slot in 0..holders[bin].len() {
            let other = holders[bin][slot];
            if augment(other, options, caps, holders, seen) {
                holders[bin][slot] = item;
                return true;
            }
        }
    }
    false
}

fn first_unplaceable(options: &[Vec<usize>], caps: &[u32]) -> Option<usize> {
    (1..=options.len()).find(|&k| max_matching(&options[..k], caps) < k).map(|k| k - 1)
}

/// Returns a new snapshot with the scheduled assignments applied.
pub fn apply_compute(result: &ScheduleResult, snapshot: &InfraSnapshot) -> Result<InfraSnapshot, PlacementError> {
    snapshot
        .with_placements(result.assignments.iter().map(|(r, n)| (r.clone(), n.clone())))
        .map_err(|e: TopologyError| PlacementError::Apply(e.to_string()))
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExprOperator {
    In,
    NotIn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchExpression {
    pub key: String,
    pub operator: ExprOperator,
    pub values: Vec<String>,
}

impl MatchExpression {
    pub fn matches(&self, labels: &LabelSet) -> bool {
        let hit = labels.get(&self.key).is_some_and(|v| self.values.iter().any(|x| x == v));
        match self.operator {
            ExprOperator::In => hit,
            ExprOperator::NotIn => !hit,
        }
    }

    fn from_predicate(p: &LabelPredicate) -> Self {
        let operator = match p.op {
            PredicateOp::Equals | PredicateOp::InSet => ExprOperator::In,
            PredicateOp::NotEquals => ExprOperator::NotIn,
        };
        Self {
            key: p.key.clone(),
            operator,
            values: p.values.clone(),
        }
    }

    fn negated(p: &LabelPredicate) -> Self {
        let mut e = Self::from_predicate(p);
        e.operator = match e.operator {
            ExprOperator::In => ExprOperator::NotIn,
            ExprOperator::NotIn => ExprOperator::In,
        };
        e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMeta {
    pub name: String,
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PodSpec {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub node_selector: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub match_expressions: Vec<MatchExpression>,
    /// Multi-label forbidden combinations: a node matching every expression of
    /// any entry is excluded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub avoid_node_label_sets: Vec<Vec<MatchExpression>>,
}

impl PodSpec {
    pub fn admits(&self, labels: &LabelSet) -> bool {
        self.node_selector.iter().all(|(k, v)| labels.get(k) == Some(v.as_str()))
            && self.match_expressions.iter().all(|e| e.matches(labels))
            && self
                .avoid_node_label_sets
                .iter()
                .all(|set| !set.iter().all(|e| e.matches(labels)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PodTemplate {
    pub metadata: ObjectMeta,
    pub spec: PodSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicaAssignment {
    pub replica: u32,
    pub node_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeploymentSpec {
    pub replicas: u32,
    pub template: PodTemplate,
    pub assignments: Vec<ReplicaAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestDoc {
    pub api_version: String,
    pub kind: String,
    pub metadata: ObjectMeta,
    pub spec: DeploymentSpec,
}

impl ManifestDoc {
    pub fn workload(&self) -> &str {
        &self.metadata.name
    }
}

/// One Deployment-like document per scheduled workload, sorted by workload id.
pub fn build_manifests(
    result: &ScheduleResult,
    directives: &[PlacementDirective],
    snapshot: &InfraSnapshot,
) -> Vec<ManifestDoc> {
    let mut docs: Vec<ManifestDoc> = directives
        .iter()
        .map(|d| {
            let labels: BTreeMap<String, String> = snapshot
                .workload(&d.workload_id)
                .map(|w| w.labels.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
                .unwrap_or_default();
            let mut spec = PodSpec {
                node_selector: BTreeMap::new(),
                match_expressions: Vec::new(),
                avoid_node_label_sets: Vec::new(),
            };
            for p in &d.required_node_predicates {
                if p.op == PredicateOp::Equals && !spec.node_selector.contains_key(&p.key) {
                    spec.node_selector.insert(p.key.clone(), p.values[0].clone());
                } else {
                    spec.match_expressions.push(MatchExpression::from_predicate(p));
                }
            }
            for set in &d.anti_predicates {
                if let [single] = set.as_slice() {
                    spec.match_expressions.push(MatchExpression::negated(single));
                } else {
                    spec.avoid_node_label_sets
                        .push(set.iter().map(MatchExpression::from_predicate).collect());
                }
            }
            let assignments = result
                .assignments
                .iter()
                .filter(|(r, _)| r.workload == d.workload_id)
                .map(|(r, n)| ReplicaAssignment {
                    replica: r.index,
                    node_name: n.clone(),
                })
                .collect();
            let meta = ObjectMeta {
                name: d.workload_id.clone(),
                labels,
            };
            ManifestDoc {
                api_version: "apps/v1".into(),
                kind: "Deployment".into(),
                metadata: meta.clone(),
                spec: DeploymentSpec {
                    replicas: d.replica_count,
                    template: PodTemplate { metadata: meta, spec },
                    assignments,
                },
            }
        })
        .collect();
    docs.sort_by(|a, b| a.metadata.name.cmp(&b.metadata.name));
    docs
}

/// Multi-document YAML; empty input renders as an empty string.
pub fn render_yaml(docs: &[ManifestDoc]) -> String {
    docs.iter()
        .map(|d| serde_yaml::to_string(d).expect("manifest serializes"))
        .collect::<Vec<_>>()
        .join("---\n")
}

pub fn render_manifest(
    result: &ScheduleResult,
    directives: &[PlacementDirective],
    snapshot: &InfraSnapshot,
) -> String {
    render_yaml(&build_manifests(result, directives, snapshot))
}

pub fn parse_manifests(yaml: &str) -> Result<Vec<ManifestDoc>, serde_yaml::Error> {
    serde_yaml::Deserializer::from_str(yaml)
        .map(ManifestDoc::deserialize)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn eq(k: &str, v: &str) -> LabelPredicate {
        LabelPredicate::equals(k, v)
    }

    #[test]
    fn phi_database_to_cloud() {
        let w = fixtures::five_worker();
        let clause = PlacementClause::require(vec![eq("app", "phi-db")], vec![eq("zone", "cloud")]);
        let dirs = compile_placement(&[clause], &w).unwrap();
        assert_eq!(dirs.len(), 1);
        let res = schedule(&dirs, &w).unwrap();
        let node = &res.assignments[&ReplicaId::new("phi-db", 0)];
        assert_eq!(w.node(node).unwrap().labels.get("zone"), Some("cloud"));
    }

    #[test]
    fn unmatched_selector_is_unenforceable() {
        let w = fixtures::five_worker();
        let clause = PlacementClause::forbid(vec![eq("app", "financial-db")], vec![eq("zone", "cloud")]);
        let err = compile_placement(&[clause], &w).unwrap_err();
        assert!(err.to_string().starts_with("unenforceable"));
    }

    #[test]
    fn unknown_node_label() {
        let w = fixtures::five_worker();
        let clause = PlacementClause::require(vec![eq("app", "patient")], vec![eq("region", "eu_region")]);
        assert_eq!(
            compile_placement(&[clause], &w),
            Err(PlacementError::UnknownLabel("region".into()))
        );
    }

    #[test]
    fn empty_feasible_set() {
        let w = fixtures::five_worker();
        let clause = PlacementClause::require(
            vec![eq("app", "patient")],
            vec![eq("zone", "edge"), eq("provider", "alibaba-cloud")],
        );
        let dirs = compile_placement(&[clause], &w).unwrap();
        assert_eq!(schedule(&dirs, &w), Err(PlacementError::Infeasible("patient".into())));
    }

    #[test]
    fn clauses_merge_per_workload() {
        let w = fixtures::five_worker();
        let a = PlacementClause::require(vec![eq("app", "appointment")], vec![eq("zone", "cloud")]);
        let b = PlacementClause::forbid(vec![eq("tier", "application")], vec![eq("provider", "alibaba-cloud")]);
        let dirs = compile_placement(&[a, b], &w).unwrap();
        let appt = dirs.iter().find(|d| d.workload_id == "appointment").unwrap();
        assert_eq!(appt.required_node_predicates.len(), 1);
        assert_eq!(appt.anti_predicates.len(), 1);
        assert_eq!(
            feasible_nodes(appt, &w).into_iter().collect::<Vec<_>>(),
            ["worker-3", "worker-4"]
        );
    }

    #[test]
    fn spreads_replicas() {
        let w = fixtures::five_worker();
        let a = PlacementClause::require(vec![eq("app", "appointment")], vec![eq("zone", "cloud")]);
        let dirs = compile_placement(&[a], &w).unwrap();
        let res = schedule(&dirs, &w).unwrap();
        let nodes: BTreeSet<_> = res.assignments.values().collect();
        assert_eq!(nodes.len(), 2);
    }

    #[test]
    fn matching_counts() {
        assert_eq!(max_matching(&[vec![0], vec![0], vec![0, 1]], &[1, 1]), 2);
        assert_eq!(max_matching(&[vec![0, 1], vec![0]], &[1, 1]), 2);
        assert_eq!(max_matching(&[vec![0], vec![0]], &[2]), 2);
    }

    #[test]
    fn manifest_round_trip() {
        let w = fixtures::five_worker();
        let clauses = [
            PlacementClause::require(vec![eq("app", "appointment")], vec![eq("security", "high"), eq("zone", "cloud")]),
            PlacementClause::forbid(
                vec![eq("data-type", "phi"), eq("tier", "database")],
                vec![eq("zone", "edge")],
            ),
            PlacementClause::forbid(vec![eq("app", "doctor")], vec![eq("zone", "edge"), eq("provider", "aws")]),
        ];
        let dirs = compile_placement(&clauses, &w).unwrap();
        let res = schedule(&dirs, &w).unwrap();
        let yaml = render_manifest(&res, &dirs, &w);
        assert!(yaml.contains("nodeSelector"));
        assert!(yaml.contains("NotIn"));
        assert!(yaml.contains("avoidNodeLabelSets"));
        let docs = parse_manifests(&yaml).unwrap();
        assert_eq!(docs, build_manifests(&res, &dirs, &w));
        for doc in &docs {
            for a in &doc.spec.assignments {
                let node = w.node(&a.node_name).unwrap();
                assert!(doc.spec.template.spec.admits(&node.labels));
            }
        }
        assert_eq!(render_yaml(&[]), "");
    }
}
