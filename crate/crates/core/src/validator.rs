//! Post-deployment compliance checks.
//!
//! Checks are derived from the intent alone and evaluated against the observed
//! post-deployment state (placements, installed rules, applied manifests).
//! They never consult the planner or scheduler outputs directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::flow::{realized_path, ControllerState};
use crate::infra::InfraSnapshot;
use crate::intent::{
    check_path, display_predicates, expand_forbidden, resolve_endpoint, resolve_flows, ClauseRef, DeviceSelector,
    FlowKey, LabelPredicate, PlacementClause, RoutingClause, StructuredIntent, Violation, ViolationKind,
};
use crate::path::Path;
use crate::placement::ManifestDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    PlacementCompliance,
    WorkloadExistence,
    LabelExistence,
    PathWaypoint,
    PathForbidden,
    FlowApplicability,
    ManifestConsistency,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PlacementCompliance => "placement-compliance",
            Self::WorkloadExistence => "workload-existence",
            Self::LabelExistence => "label-existence",
            Self::PathWaypoint => "path-waypoint",
            Self::PathForbidden => "path-forbidden",
            Self::FlowApplicability => "flow-applicability",
            Self::ManifestConsistency => "manifest-consistency",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case")]
pub enum CheckTarget {
    Placement { clause: PlacementClause },
    Selector { selector: Vec<LabelPredicate> },
    PlacementLabels { clause: PlacementClause },
    RoutingLabels { clause: RoutingClause },
    Waypoint { clause: RoutingClause, index: usize },
    Forbidden { clause: RoutingClause },
    Applicability { clause: RoutingClause },
    Manifests { workloads: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingCheck {
    pub kind: CheckKind,
    pub clause: Option<ClauseRef>,
    pub subject: String,
    pub target: CheckTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<WitnessPath>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.paths.is_empty() && self.notes.is_empty()
    }

    fn note(msg: impl Into<String>) -> Self {
        Self {
            notes: vec![msg.into()],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPath {
    pub flow: FlowKey,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub kind: CheckKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clause: Option<ClauseRef>,
    pub subject: String,
    pub outcome: Outcome,
    pub evidence: Evidence,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Self::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentReport {
    pub intent_id: String,
    pub verdict: Verdict,
    pub checks_executed: usize,
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub timings: Vec<StageTiming>,
}

impl IntentReport {
    pub fn new(intent_id: impl Into<String>, checks: Vec<CheckResult>) -> Self {
        Self {
            intent_id: intent_id.into(),
            verdict: verdict(&checks),
            checks_executed: checks.len(),
            checks,
            timings: Vec::new(),
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Observed state after deployment.
#[derive(Debug, Clone, Copy)]
pub struct PostState<'a> {
    pub snapshot: &'a InfraSnapshot,
    pub controller: &'a ControllerState,
    pub manifests: &'a [ManifestDoc],
}

/// Expands an intent into atomic checks. Manifest consistency is checked once
/// per intent that carries placement clauses.
pub fn derive_checks(intent: &StructuredIntent, snapshot: &InfraSnapshot) -> Vec<PendingCheck> {
    let mut out = Vec::new();
    for (i, clause) in intent.placement_clauses.iter().enumerate() {
        let cref = Some(ClauseRef::Placement(i));
        if !clause.workload_selector.is_empty() {
            out.push(PendingCheck {
                kind: CheckKind::WorkloadExistence,
                clause: cref,
                subject: display_predicates(&clause.workload_selector),
                target: CheckTarget::Selector {
                    selector: clause.workload_selector.clone(),
                },
            });
        }
        out.push(PendingCheck {
            kind: CheckKind::LabelExistence,
            clause: cref,
            subject: display_predicates(&clause.node_predicates),
            target: CheckTarget::PlacementLabels { clause: clause.clone() },
        });
        out.push(PendingCheck {
            kind: CheckKind::PlacementCompliance,
            clause: cref,
            subject: clause.to_string(),
            target: CheckTarget::Placement { clause: clause.clone() },
        });
    }
    if !intent.placement_clauses.is_empty() {
        let workloads: BTreeSet<String> = intent
            .placement_clauses
            .iter()
            .flat_map(|c| snapshot.workloads().filter(|w| c.selects(&w.labels)).map(|w| w.id.clone()))
            .collect();
        out.push(PendingCheck {
            kind: CheckKind::ManifestConsistency,
            clause: None,
            subject: intent.id.clone(),
            target: CheckTarget::Manifests {
                workloads: workloads.into_iter().collect(),
            },
        });
    }
    for (i, clause) in intent.routing_clauses.iter().enumerate() {
        let cref = Some(ClauseRef::Routing(i));
        out.push(PendingCheck {
            kind: CheckKind::LabelExistence,
            clause: cref,
            subject: clause.to_string(),
            target: CheckTarget::RoutingLabels { clause: clause.clone() },
        });
        for (w, waypoint) in clause.must_go.iter().enumerate() {
            out.push(PendingCheck {
                kind: CheckKind::PathWaypoint,
                clause: cref,
                subject: waypoint.clone(),
                target: CheckTarget::Waypoint {
                    clause: clause.clone(),
                    index: w,
                },
            });
        }
        out.push(PendingCheck {
            kind: CheckKind::PathForbidden,
            clause: cref,
            subject: clause.to_string(),
            target: CheckTarget::Forbidden { clause: clause.clone() },
        });
        out.push(PendingCheck {
            kind: CheckKind::FlowApplicability,
            clause: cref,
            subject: clause.to_string(),
            target: CheckTarget::Applicability { clause: clause.clone() },
        });
    }
    out
}

/// Runs every check; none is skipped because another failed.
pub fn run_checks(pending: &[PendingCheck], post: &PostState<'_>) -> Vec<CheckResult> {
    pending.iter().map(|c| run_one(c, post)).collect()
}

pub fn verdict(results: &[CheckResult]) -> Verdict {
    if results.iter().all(CheckResult::passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Derives and runs all checks for an intent.
pub fn validate(intent: &StructuredIntent, post: &PostState<'_>) -> IntentReport {
    let pending = derive_checks(intent, post.snapshot);
    IntentReport::new(&intent.id, run_checks(&pending, post))
}

fn result(check: &PendingCheck, evidence: Evidence, pass: bool) -> CheckResult {
    CheckResult {
        kind: check.kind,
        clause: check.clause,
        subject: check.subject.clone(),
        outcome: if pass { Outcome::Pass } else { Outcome::Fail },
        evidence,
    }
}

fn run_one(check: &PendingCheck, post: &PostState<'_>) -> CheckResult {
    let snap = post.snapshot;
    match &check.target {
        CheckTarget::Placement { clause } => {
            let mut violations =
                crate::intent::satisfies_placement(snap.placements(), std::slice::from_ref(clause), snap);
            for v in &mut violations {
                v.clause_ref = check.clause.unwrap_or(v.clause_ref);
            }
            let pass = violations.is_empty();
            let mut ev = Evidence {
                violations,
                ..Evidence::default()
            };
            if pass {
                let n = snap.workloads().filter(|w| clause.selects(&w.labels)).count();
                ev.notes.push(format!("{n} selected workload(s) compliant"));
            }
            result(check, ev, pass)
        }
        CheckTarget::Selector { selector } => {
            let matched: Vec<&str> = snap
                .workloads()
                .filter(|w| crate::intent::eval_all(selector, &w.labels))
                .map(|w| w.id.as_str())
                .collect();
            if matched.is_empty() {
                let ev = Evidence::note(format!(
                    "unenforceable: no workload matches {}",
                    display_predicates(selector)
                ));
                result(check, ev, false)
            } else {
                result(check, Evidence::note(format!("matches {}", matched.join(", "))), true)
            }
        }
        CheckTarget::PlacementLabels { clause } => {
            let mut missing = Vec::new();
            for p in &clause.workload_selector {
                missing.extend(missing_labels(p, snap.workloads().map(|w| &w.labels), "workload"));
            }
            for p in &clause.node_predicates {
                missing.extend(missing_labels(p, snap.nodes().map(|n| &n.labels), "node"));
            }
            labels_result(check, missing)
        }
        CheckTarget::RoutingLabels { clause } => {
            let mut missing = Vec::new();
            for (role, ep) in [("src", &clause.src), ("dest", &clause.dest)] {
                if let Some(r) = ep {
                    if !snap.has_vertex(r) && snap.workload(r).is_none() {
                        missing.push(format!("{role} `{r}` is not a host, device or workload"));
                    }
                }
            }
            for w in &clause.must_go {
                if snap.device(w).is_none() {
                    missing.push(format!("waypoint `{w}` is not a device"));
                }
            }
            for f in &clause.forbidden {
                match f {
                    DeviceSelector::Id(id) if snap.device(id).is_none() => {
                        missing.push(format!("forbidden `{id}` is not a device"));
                    }
                    DeviceSelector::Id(_) => {}
                    DeviceSelector::Label(p) => {
                        missing.extend(missing_labels(p, snap.devices().map(|d| &d.labels), "device"))
                    }
                }
            }
            labels_result(check, missing)
        }
        CheckTarget::Applicability { clause } => {
            let flows = resolve_flows(clause, snap);
            if flows.is_empty() {
                let why = match (&clause.src, &clause.dest) {
                    (None, _) | (_, None) => "no-op policy: clause names no src/dest pair".to_string(),
                    (Some(s), Some(d)) => {
                        let describe = |r: &str| match resolve_endpoint(r, snap).len() {
                            0 => format!("`{r}` resolves to nothing"),
                            n => format!("`{r}` resolves to {n} vertex(es)"),
                        };
                        format!("no-op policy: no concrete flow, {}; {}", describe(s), describe(d))
                    }
                };
                let ev = Evidence {
                    violations: vec![Violation {
                        clause_ref: check.clause.unwrap_or(ClauseRef::Routing(0)),
                        kind: ViolationKind::NoApplicableFlow,
                        subject: clause.to_string(),
                        reason: why,
                    }],
                    ..Evidence::default()
                };
                result(check, ev, false)
            } else {
                let names: Vec<String> = flows.iter().map(ToString::to_string).collect();
                result(check, Evidence::note(format!("applies to {}", names.join(", "))), true)
            }
        }
        CheckTarget::Forbidden { clause } => path_check(check, post, clause, |_| true),
        CheckTarget::Waypoint { clause, index } => {
            let waypoint = clause.must_go[*index].clone();
            path_check(check, post, clause, move |v| {
                matches!(v.kind, ViolationKind::MissingWaypoint | ViolationKind::WaypointOrder) && v.subject == waypoint
            })
        }
        CheckTarget::Manifests { workloads } => manifest_check(check, post, workloads),
    }
}

fn labels_result(check: &PendingCheck, missing: Vec<String>) -> CheckResult {
    if missing.is_empty() {
        result(check, Evidence::note("all referenced labels exist"), true)
    } else {
        result(
            check,
            Evidence {
                notes: missing,
                ..Evidence::default()
            },
            false,
        )
    }
}

/// Keys and values of `p` that no entity in `pool` carries.
fn missing_labels<'a>(
    p: &LabelPredicate,
    pool: impl Iterator<Item = &'a crate::infra::LabelSet>,
    entity: &str,
) -> Vec<String> {
    let values: BTreeSet<&str> = pool.filter_map(|l| l.get(&p.key)).collect();
    if values.is_empty() {
        return vec![format!("{entity} label key `{}` does not exist", p.key)];
    }
    p.values
        .iter()
        .filter(|v| !values.contains(v.as_str()))
        .map(|v| format!("{entity} label `{}={v}` does not exist", p.key))
        .collect()
}

/// Traces every flow the clause applies to and keeps the violations that
/// `relevant` selects. A trace failure is itself a violation.
fn path_check(
    check: &PendingCheck,
    post: &PostState<'_>,
    clause: &RoutingClause,
    relevant: impl Fn(&Violation) -> bool,
) -> CheckResult {
    let snap = post.snapshot;
    let cref = check.clause.unwrap_or(ClauseRef::Routing(0));
    let flows = resolve_flows(clause, snap);
    if flows.is_empty() {
        return result(check, Evidence::note("no flow to trace"), true);
    }
    let forbidden = expand_forbidden(&clause.forbidden, snap);
    let only_forbidden = check.kind == CheckKind::PathForbidden;
    let mut ev = Evidence::default();
    for flow in &flows {
        match realized_path(post.controller, flow, snap) {
            Ok(path) => {
                let scoped = if only_forbidden {
                    RoutingClause {
                        must_go: Vec::new(),
                        ..clause.clone()
                    }
                } else {
                    clause.clone()
                };
                let forb = if only_forbidden { forbidden.clone() } else { BTreeSet::new() };
                ev.violations.extend(
                    check_path(cref, &scoped, flow, &path, &forb, snap)
                        .into_iter()
                        .filter(&relevant),
                );
                ev.paths.push(witness(flow, &path));
            }
            Err(e) => ev.violations.push(Violation {
                clause_ref: cref,
                kind: ViolationKind::MissingPath,
                subject: flow.to_string(),
                reason: e.to_string(),
            }),
        }
    }
    let pass = ev.violations.is_empty();
    result(check, ev, pass)
}

fn witness(flow: &FlowKey, path: &Path) -> WitnessPath {
    WitnessPath {
        flow: flow.clone(),
        path: path.vertices.clone(),
    }
}

fn manifest_check(check: &PendingCheck, post: &PostState<'_>, workloads: &[String]) -> CheckResult {
    let snap = post.snapshot;
    let docs: BTreeMap<&str, &ManifestDoc> = post.manifests.iter().map(|d| (d.workload(), d)).collect();
    let mut problems = Vec::new();
    for wl in workloads {
        let Some(doc) = docs.get(wl.as_str()) else {
            problems.push(format!("no manifest applied for `{wl}`"));
            continue;
        };
        for a in &doc.spec.assignments {
            let replica = crate::infra::ReplicaId::new(wl, a.replica);
            match snap.placements().get(&replica) {
                Some(n) if *n == a.node_name => {}
                Some(n) => problems.push(format!(
                    "{replica} is on `{n}` but the manifest pins `{}`",
                    a.node_name
                )),
                None => problems.push(format!("{replica} is not placed")),
            }
            match snap.node(&a.node_name) {
                Some(node) if doc.spec.template.spec.admits(&node.labels) => {}
                Some(_) => problems.push(format!(
                    "{replica} pinned to `{}`, which the manifest's node constraints reject",
                    a.node_name
                )),
                None => problems.push(format!("manifest names unknown node `{}`", a.node_name)),
            }
        }
    }
    if problems.is_empty() {
        result(
            check,
            Evidence::note(format!("{} manifest(s) consistent", workloads.len())),
            true,
        )
    } else {
        result(
            check,
            Evidence {
                notes: problems,
                ..Evidence::default()
            },
            false,
        )
    }
}
