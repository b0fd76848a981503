//! Stage pipeline: state collection, interpretation, safety gate, compute
//! apply, observation, network apply, validation.
//!
//! Apply stages are transactional. If anything after interpretation fails or
//! is rejected, the world and controller are left exactly as they were, and
//! validation still runs so the report explains what does not hold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::flow::{compile_flows, ControllerState, FlowRule};
use crate::frontend::{InterpretError, Interpreter, RolePipelineTrace, TokenUsage};
use crate::infra::{condense, InfraSnapshot, StateScope};
use crate::intent::{
    expand_forbidden, resolve_flows, Configuration, FlowKey, PlacementMode, PredicateOp,
    StructuredIntent,
};
use crate::path::{plan, Path, PathQuery, WeightMode};
use crate::placement::{apply_compute, build_manifests, compile_placement, render_yaml, schedule, ManifestDoc};
use crate::validator::{validate, IntentReport, PostState, StageTiming};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    StateCollect,
    Interpret,
    Gate,
    ComputeApply,
    Observe,
    NetworkApply,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::StateCollect,
        Stage::Interpret,
        Stage::Gate,
        Stage::ComputeApply,
        Stage::Observe,
        Stage::NetworkApply,
        Stage::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StateCollect => "state-collect",
            Self::Interpret => "interpret",
            Self::Gate => "gate",
            Self::ComputeApply => "compute-apply",
            Self::Observe => "observe",
            Self::NetworkApply => "network-apply",
            Self::Validate => "validate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed(String),
    Rejected(String),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seq: u32,
    pub stage: Stage,
    #[serde(flatten)]
    pub status: StageStatus,
    pub started_s: f64,
    pub elapsed_s: f64,
}

/// Policy applied by the safety gate before anything touches the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatePolicy {
    /// Nodes no workload may be steered onto, by id.
    pub protected_nodes: Vec<String>,
    /// Node labels marking control-plane machines.
    pub protected_node_labels: Vec<(String, String)>,
    /// Device labels marking controller devices that may not carry tenant flows.
    pub protected_device_labels: Vec<(String, String)>,
}

impl Default for GatePolicy {
    fn default() -> Self {
        Self {
            protected_nodes: vec!["master".into(), "controller".into()],
            protected_node_labels: vec![
                ("node-role".into(), "master".into()),
                ("node-role".into(), "control-plane".into()),
            ],
            protected_device_labels: vec![("role".into(), "controller".into())],
        }
    }
}

impl GatePolicy {
    fn node_is_protected(&self, id: &str, labels: &crate::infra::LabelSet) -> bool {
        self.protected_nodes.iter().any(|n| n == id)
            || self.protected_node_labels.iter().any(|(k, v)| labels.get(k) == Some(v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reasons", rename_all = "lowercase")]
pub enum GateDecision {
    Accept,
    Reject(Vec<String>),
}

/// Checks an intent for groundedness, enforceability, internal contradictions
/// and operational policy. Nothing is applied; every problem is listed.
pub fn safety_gate(intent: &StructuredIntent, world: &InfraSnapshot, policy: &GatePolicy) -> GateDecision {
    let mut reasons = Vec::new();
    if let Err(e) = intent.validate() {
        reasons.push(e.to_string());
    }
    let summary = condense(world, StateScope::Both);
    if let Err(e) = crate::frontend::ground(intent, &summary) {
        reasons.push(format!("not grounded: {e}"));
    }
    if !intent.placement_clauses.is_empty() {
        if let Err(e) = compile_placement(&intent.placement_clauses, world) {
            reasons.push(e.to_string());
        }
    }
    for (i, c) in intent.routing_clauses.iter().enumerate() {
        let forbidden = expand_forbidden(&c.forbidden, world);
        if let Some(w) = c.must_go.iter().find(|w| forbidden.contains(*w)) {
            reasons.push(format!("routing[{i}]: `{w}` is both required and forbidden"));
        }
        for ep in [&c.src, &c.dest].into_iter().flatten() {
            if forbidden.contains(ep) {
                reasons.push(format!("routing[{i}]: endpoint `{ep}` is forbidden"));
            }
        }
        let named: BTreeSet<&String> = c.must_go.iter().chain(&c.src).chain(&c.dest).collect();
        for id in named {
            if let Some(d) = world.device(id) {
                for (k, v) in &policy.protected_device_labels {
                    if d.labels.get(k) == Some(v.as_str()) {
                        reasons.push(format!("routing[{i}]: `{id}` is a protected device ({k}={v})"));
                    }
                }
            }
        }
    }
    for (i, c) in intent.placement_clauses.iter().enumerate() {
        if c.mode != PlacementMode::Require {
            continue;
        }
        let named = c.node_predicates.iter().any(|p| {
            p.op != PredicateOp::NotEquals
                && policy.protected_node_labels.iter().any(|(k, v)| &p.key == k && p.values.contains(v))
        });
        // A clause that only control-plane nodes satisfy targets them too.
        let admitted: Vec<_> = world.nodes().filter(|n| c.allows(&n.labels)).collect();
        let only_protected =
            !admitted.is_empty() && admitted.iter().all(|n| policy.node_is_protected(&n.id, &n.labels));
        if named || only_protected {
            reasons.push(format!("placement[{i}]: targets protected control-plane nodes"));
        }
    }
    if reasons.is_empty() {
        GateDecision::Accept
    } else {
        GateDecision::Reject(reasons)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub gate: GatePolicy,
    pub weight_mode: WeightMode,
    /// Simulated wait for workloads to settle after compute apply.
    pub stabilization_delay: Duration,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            gate: GatePolicy::default(),
            weight_mode: WeightMode::Weights,
            stabilization_delay: Duration::ZERO,
        }
    }
}

/// A world plus its controller, evolving across intents.
#[derive(Debug, Clone)]
pub struct World {
    pub snapshot: InfraSnapshot,
    pub controller: ControllerState,
}

impl World {
    pub fn new(snapshot: InfraSnapshot) -> Self {
        let controller =
            ControllerState::from_snapshot(&snapshot).unwrap_or_else(|_| ControllerState::for_snapshot(&snapshot));
        Self { snapshot, controller }
    }
}

/// One routed flow after merging every clause that applies to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPlan {
    pub flow: FlowKey,
    pub clauses: Vec<usize>,
    pub must_go: Vec<String>,
    pub forbidden: BTreeSet<String>,
    pub out_port: Option<u32>,
    pub path: Option<Path>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub intent_id: String,
    pub source_text: Option<String>,
    pub intent: Option<StructuredIntent>,
    pub scope: Option<StateScope>,
    pub stages: Vec<StageRecord>,
    pub gate: Option<GateDecision>,
    pub interpret_error: Option<String>,
    pub configuration: Configuration,
    pub flow_plans: Vec<FlowPlan>,
    pub manifest_yaml: String,
    pub report: IntentReport,
    pub frontend_trace: Option<RolePipelineTrace>,
    pub tokens: Option<TokenUsage>,
    pub total_s: f64,
    #[serde(skip)]
    pub world: World,
}

impl RunOutcome {
    /// Every stage completed and every check passed.
    pub fn success(&self) -> bool {
        self.stages.iter().all(|s| matches!(s.status, StageStatus::Ok)) && self.report.verdict.is_pass()
    }

    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| !matches!(s.status, StageStatus::Ok | StageStatus::Skipped(_)))
    }

    /// Short reason for a failed run, if any.
    pub fn failure_reason(&self) -> Option<String> {
        if let Some(s) = self.failed_stage() {
            let detail = match &s.status {
                StageStatus::Failed(d) | StageStatus::Rejected(d) | StageStatus::Skipped(d) => d.clone(),
                StageStatus::Ok => String::new(),
            };
            return Some(format!("{}: {detail}", s.stage));
        }
        if !self.report.verdict.is_pass() {
            let kinds: Vec<String> = self.report.failed().map(|c| c.kind.to_string()).collect();
            return Some(format!("validation failed: {}", kinds.join(", ")));
        }
        None
    }
}

pub struct Orchestrator<'a> {
    interpreter: &'a dyn Interpreter,
    config: OrchestratorConfig,
}

struct Clock {
    start: Instant,
    seq: u32,
    stages: Vec<StageRecord>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            seq: 0,
            stages: Vec::new(),
        }
    }

    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> (StageStatus, T)) -> T {
        let started = self.start.elapsed();
        let t0 = Instant::now();
        let (status, value) = f();
        self.seq += 1;
        self.stages.push(StageRecord {
            seq: self.seq,
            stage,
            status,
            started_s: started.as_secs_f64(),
            elapsed_s: t0.elapsed().as_secs_f64(),
        });
        value
    }

    fn skip(&mut self, stage: Stage, why: &str) {
        self.run(stage, || (StageStatus::Skipped(why.to_string()), ()));
    }
}

impl<'a> Orchestrator<'a> {
    pub fn new(interpreter: &'a dyn Interpreter) -> Self {
        Self::with_config(interpreter, OrchestratorConfig::default())
    }

    pub fn with_config(interpreter: &'a dyn Interpreter, config: OrchestratorConfig) -> Self {
        Self { interpreter, config }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Runs a natural-language sentence end to end.
    pub fn execute(&self, text: &str, world: &World) -> RunOutcome {
        self.execute_with_id(text, None, world)
    }

    /// Like [`execute`](Self::execute) but overrides the generated intent id.
    pub fn execute_with_id(&self, text: &str, id: Option<&str>, world: &World) -> RunOutcome {
        let mut clock = Clock::new();
        let summary = clock.run(Stage::StateCollect, || (StageStatus::Ok, condense(&world.snapshot, StateScope::Both)));
        let interpreted = clock.run(Stage::Interpret, || match self.interpreter.interpret(text, &summary) {
            Ok(i) => (StageStatus::Ok, Ok(i)),
            Err(e) => (StageStatus::Failed(format!("{}: {e}", e.kind())), Err(e)),
        });
        match interpreted {
            Ok(mut interp) => {
                if let Some(id) = id {
                    interp.intent.id = id.to_string();
                }
                let mut out = self.enforce(interp.intent, world, clock);
                out.source_text = Some(text.to_string());
                out.scope = Some(interp.scope);
                out.frontend_trace = interp.trace;
                out.tokens = interp.tokens;
                out
            }
            Err(e) => self.uninterpreted(text, id, e, world, clock),
        }
    }

    /// Runs an already-structured intent, skipping interpretation.
    pub fn execute_structured(&self, intent: &StructuredIntent, world: &World) -> RunOutcome {
        let mut clock = Clock::new();
        clock.run(Stage::StateCollect, || (StageStatus::Ok, ()));
        clock.skip(Stage::Interpret, "structured intent supplied");
        let mut out = self.enforce(intent.clone(), world, clock);
        out.source_text = intent.source_text.clone();
        out
    }

    fn uninterpreted(&self, text: &str, id: Option<&str>, err: InterpretError, world: &World, mut clock: Clock) -> RunOutcome {
        for stage in [Stage::Gate, Stage::ComputeApply, Stage::Observe, Stage::NetworkApply, Stage::Validate] {
            clock.skip(stage, "no intent");
        }
        let intent_id = id.map_or_else(|| crate::frontend::intent_id_for(text), str::to_string);
        let mut report = IntentReport::new(&intent_id, Vec::new());
        report.timings = timings(&clock.stages);
        RunOutcome {
            intent_id,
            source_text: Some(text.to_string()),
            intent: None,
            scope: None,
            gate: None,
            interpret_error: Some(err.to_string()),
            configuration: Configuration {
                sigma: world.snapshot.placements().clone(),
                ..Configuration::default()
            },
            flow_plans: Vec::new(),
            manifest_yaml: String::new(),
            report,
            frontend_trace: None,
            tokens: None,
            total_s: clock.start.elapsed().as_secs_f64(),
            stages: clock.stages,
            world: world.clone(),
        }
    }

    fn enforce(&self, intent: StructuredIntent, world: &World, mut clock: Clock) -> RunOutcome {
        let gate = clock.run(Stage::Gate, || {
            let d = safety_gate(&intent, &world.snapshot, &self.config.gate);
            let status = match &d {
                GateDecision::Accept => StageStatus::Ok,
                GateDecision::Reject(r) => StageStatus::Rejected(r.join("; ")),
            };
            (status, d)
        });

        let mut applied = world.clone();
        let mut manifests: Vec<ManifestDoc> = Vec::new();
        let mut flow_plans = Vec::new();
        let mut installed: Vec<FlowRule> = Vec::new();
        let mut committed = false;

        if gate == GateDecision::Accept {
            let compute = clock.run(Stage::ComputeApply, || match self.apply_compute(&intent, &world.snapshot) {
                Ok(v) => (StageStatus::Ok, Some(v)),
                Err(e) => (StageStatus::Failed(e), None),
            });
            if let Some((snapshot, docs)) = compute {
                let plans = clock.run(Stage::Observe, || match observe(&intent, &snapshot) {
                    Ok(p) => (StageStatus::Ok, Some(p)),
                    Err(e) => (StageStatus::Failed(e), None),
                });
                if let Some(plans) = plans {
                    let net = clock.run(Stage::NetworkApply, || {
                        match self.apply_network(plans, &snapshot, &world.controller) {
                            Ok(v) => (StageStatus::Ok, Ok(v)),
                            Err((e, plans)) => (StageStatus::Failed(e), Err(plans)),
                        }
                    });
                    match net {
                        Ok((controller, plans, rules)) => {
                            applied = World { snapshot, controller };
                            manifests = docs;
                            flow_plans = plans;
                            installed = rules;
                            committed = true;
                        }
                        Err(plans) => flow_plans = plans,
                    }
                } else {
                    clock.skip(Stage::NetworkApply, "observation failed");
                }
            } else {
                clock.skip(Stage::Observe, "compute apply failed");
                clock.skip(Stage::NetworkApply, "compute apply failed");
            }
        } else {
            for stage in [Stage::ComputeApply, Stage::Observe, Stage::NetworkApply] {
                clock.skip(stage, "rejected by gate");
            }
        }

        let mut report = clock.run(Stage::Validate, || {
            let post = PostState {
                snapshot: &applied.snapshot,
                controller: &applied.controller,
                manifests: &manifests,
            };
            (StageStatus::Ok, validate(&intent, &post))
        });
        report.timings = timings(&clock.stages);

        let configuration = Configuration {
            sigma: applied.snapshot.placements().clone(),
            rho: if committed { intent.routing_clauses.clone() } else { Vec::new() },
            realized_flows: installed,
            manifests: manifests.clone(),
        };
        RunOutcome {
            intent_id: intent.id.clone(),
            source_text: None,
            intent: Some(intent),
            scope: None,
            gate: Some(gate),
            interpret_error: None,
            configuration,
            flow_plans,
            manifest_yaml: render_yaml(&manifests),
            report,
            frontend_trace: None,
            tokens: None,
            total_s: clock.start.elapsed().as_secs_f64(),
            stages: clock.stages,
            world: applied,
        }
    }

    fn apply_compute(
        &self,
        intent: &StructuredIntent,
        snapshot: &InfraSnapshot,
    ) -> Result<(InfraSnapshot, Vec<ManifestDoc>), String> {
        if intent.placement_clauses.is_empty() {
            return Ok((snapshot.clone(), Vec::new()));
        }
        let directives = compile_placement(&intent.placement_clauses, snapshot).map_err(|e| e.to_string())?;
        let result = schedule(&directives, snapshot).map_err(|e| e.to_string())?;
        let next = apply_compute(&result, snapshot).map_err(|e| e.to_string())?;
        if !self.config.stabilization_delay.is_zero() {
            std::thread::sleep(self.config.stabilization_delay);
        }
        Ok((next, build_manifests(&result, &directives, snapshot)))
    }

    #[allow(clippy::type_complexity)]
    fn apply_network(
        &self,
        mut plans: Vec<FlowPlan>,
        snapshot: &InfraSnapshot,
        controller: &ControllerState,
    ) -> Result<(ControllerState, Vec<FlowPlan>, Vec<FlowRule>), (String, Vec<FlowPlan>)> {
        // Port maps follow the post-placement topology; rules already installed
        // for earlier intents are carried over.
        let base = ControllerState::for_snapshot(snapshot);
        let mut state = match base.install(&controller.rules().cloned().collect::<Vec<_>>()) {
            Ok(s) => s,
            Err(e) => return Err((format!("existing rules do not fit the topology: {e}"), plans)),
        };
        let mut rules = Vec::new();
        for i in 0..plans.len() {
            let p = &plans[i];
            let query = PathQuery {
                src: p.flow.src.clone(),
                dest: p.flow.dest.clone(),
                must_go: p.must_go.clone(),
                forbidden: p.forbidden.clone(),
                weight_mode: self.config.weight_mode,
            };
            let path = match plan(&query, snapshot) {
                Ok(path) => path,
                Err(e) => return Err((format!("{}: {e}", p.flow), plans)),
            };
            // An intent re-routing a flow replaces that flow's earlier rules.
            state = state.without_flow(&p.flow);
            let compiled = match compile_flows(&path, &p.flow, &state, snapshot, p.out_port) {
                Ok(r) => r,
                Err(e) => return Err((format!("{}: {e}", p.flow), plans)),
            };
            state = match state.install(&compiled) {
                Ok(s) => s,
                Err(e) => return Err((format!("{}: {e}", p.flow), plans)),
            };
            rules.extend(compiled);
            plans[i].path = Some(path);
        }
        Ok((state, plans, rules))
    }
}

fn timings(stages: &[StageRecord]) -> Vec<StageTiming> {
    stages
        .iter()
        .map(|s| StageTiming {
            stage: s.stage.to_string(),
            seconds: s.elapsed_s,
        })
        .collect()
}

/// Resolves routing clauses to concrete flows on the post-placement world and
/// merges clauses that target the same flow.
pub fn observe(intent: &StructuredIntent, snapshot: &InfraSnapshot) -> Result<Vec<FlowPlan>, String> {
    let mut plans: BTreeMap<FlowKey, FlowPlan> = BTreeMap::new();
    for (i, clause) in intent.routing_clauses.iter().enumerate() {
        let forbidden = expand_forbidden(&clause.forbidden, snapshot);
        let flows = resolve_flows(clause, snapshot);
        // Enforcing nothing is not success; roll back instead.
        if flows.is_empty() {
            return Err(format!("routing[{i}]: no-op policy, {clause} matches no concrete flow after placement"));
        }
        for flow in flows {
            let entry = plans.entry(flow.clone()).or_insert_with(|| FlowPlan {
                flow,
                clauses: Vec::new(),
                must_go: Vec::new(),
                forbidden: BTreeSet::new(),
                out_port: None,
                path: None,
            });
            entry.clauses.push(i);
            for w in &clause.must_go {
                if !entry.must_go.contains(w) {
                    entry.must_go.push(w.clone());
                }
            }
            entry.forbidden.extend(forbidden.iter().cloned());
            match (entry.out_port, clause.out_port) {
                (Some(a), Some(b)) if a != b => {
                    return Err(format!("{}: clauses disagree on out_port ({a} vs {b})", entry.flow));
                }
                (None, Some(b)) => entry.out_port = Some(b),
                _ => {}
            }
        }
    }
    Ok(plans.into_values().collect())
}
