//! Per-hop flow rules on a simulated SDN controller, constraint-document
//! parsing, and tracing of the paths rules actually induce.
//!
//! Ports are numbered from 1 on each switch in ascending neighbor-id order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::infra::{InfraSnapshot, VertexKind};
use crate::intent::{FlowKey, RoutingClause};
use crate::path::Path;

pub const DEFAULT_PRIORITY: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowMatch {
    pub src: String,
    pub dest: String,
}

impl From<&FlowKey> for FlowMatch {
    fn from(f: &FlowKey) -> Self {
        Self {
            src: f.src.clone(),
            dest: f.dest.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRule {
    pub switch_id: String,
    #[serde(rename = "match")]
    pub flow_match: FlowMatch,
    pub out_port: u32,
    #[serde(default = "default_priority")]
    pub priority: u32,
}

fn default_priority() -> u32 {
    DEFAULT_PRIORITY
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("no port on `{switch}` leads to `{neighbor}`")]
    PortLookup { switch: String, neighbor: String },
    #[error("`{switch}` has no port {port}")]
    BadOutPort { switch: String, port: u32 },
    #[error("conflicting rule on `{switch}` for {src}->{dest}: port {existing} vs {proposed}")]
    Conflict {
        switch: String,
        src: String,
        dest: String,
        existing: u32,
        proposed: u32,
    },
    #[error("path {0} does not match the flow endpoints")]
    EndpointMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("flow endpoint `{0}` is unknown")]
    UnknownEndpoint(String),
    #[error("no rule on `{switch}` for the flow")]
    MissingRule { switch: String },
    #[error("rule on `{switch}` points at port {port}, which does not exist")]
    BadPort { switch: String, port: u32 },
    #[error("forwarding loops back to `{switch}`")]
    Loop { switch: String },
    #[error("`{switch}` delivers the flow to `{host}`")]
    Misdelivered { switch: String, host: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintDocError {
    #[error("constraint document is not valid JSON: {0}")]
    Parse(String),
    #[error("constraint document schema violation: {0}")]
    Schema(String),
}

/// Installed rules plus the switch port maps derived from the topology.
/// Serializes as the sorted rule list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControllerState {
    rules: BTreeMap<(String, FlowMatch), FlowRule>,
    ports: BTreeMap<String, Vec<String>>,
}

impl Serialize for ControllerState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.rules.values())
    }
}

impl ControllerState {
    /// Empty rule table over the snapshot's port map.
    pub fn for_snapshot(snapshot: &InfraSnapshot) -> Self {
        let ports = snapshot
            .devices()
            .map(|d| {
                let ns = snapshot
                    .neighbors(&d.id)
                    .map(|n| n.iter().map(|(v, _)| v.clone()).collect())
                    .unwrap_or_default();
                (d.id.clone(), ns)
            })
            .collect();
        Self {
            rules: BTreeMap::new(),
            ports,
        }
    }

    /// Port map plus whatever rules the snapshot already carries.
    pub fn from_snapshot(snapshot: &InfraSnapshot) -> Result<Self, FlowError> {
        Self::for_snapshot(snapshot).install(snapshot.flows())
    }

    pub fn port_of(&self, switch: &str, neighbor: &str) -> Option<u32> {
        self.ports
            .get(switch)?
            .iter()
            .position(|n| n == neighbor)
            .map(|i| i as u32 + 1)
    }

    pub fn neighbor_at(&self, switch: &str, port: u32) -> Option<&str> {
        let idx = usize::try_from(port).ok()?.checked_sub(1)?;
        self.ports.get(switch)?.get(idx).map(String::as_str)
    }

    pub fn port_count(&self, switch: &str) -> usize {
        self.ports.get(switch).map_or(0, Vec::len)
    }

    pub fn rule(&self, switch: &str, flow: &FlowKey) -> Option<&FlowRule> {
        self.rules.get(&(switch.to_string(), FlowMatch::from(flow)))
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.rules.values()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Returns a new state with `rules` added. Re-installing an identical rule
    /// is a no-op; a different port for the same (switch, match) is a conflict.
    pub fn install(&self, rules: &[FlowRule]) -> Result<Self, FlowError> {
        let mut next = self.clone();
        for rule in rules {
            if next.port_count(&rule.switch_id) < rule.out_port as usize || rule.out_port == 0 {
                return Err(FlowError::BadOutPort {
                    switch: rule.switch_id.clone(),
                    port: rule.out_port,
                });
            }
            let key = (rule.switch_id.clone(), rule.flow_match.clone());
            match next.rules.get(&key) {
                Some(existing) if existing.out_port != rule.out_port => {
                    return Err(FlowError::Conflict {
                        switch: rule.switch_id.clone(),
                        src: rule.flow_match.src.clone(),
                        dest: rule.flow_match.dest.clone(),
                        existing: existing.out_port,
                        proposed: rule.out_port,
                    });
                }
                Some(_) => {}
                None => {
                    next.rules.insert(key, rule.clone());
                }
            }
        }
        Ok(next)
    }

    /// Returns a new state without any rule matching `flow`.
    pub fn without_flow(&self, flow: &FlowKey) -> Self {
        let m = FlowMatch::from(flow);
        let mut next = self.clone();
        next.rules.retain(|(_, fm), _| *fm != m);
        next
    }
}

/// One rule per switch on the path, forwarding toward the next vertex. The
/// optional `out_port` overrides the port of the last switch; a path ending at
/// a switch only gets a rule there when an override is given.
pub fn compile_flows(
    path: &Path,
    flow: &FlowKey,
    state: &ControllerState,
    snapshot: &InfraSnapshot,
    out_port: Option<u32>,
) -> Result<Vec<FlowRule>, FlowError> {
    let v = &path.vertices;
    if v.first() != Some(&flow.src) || v.last() != Some(&flow.dest) {
        return Err(FlowError::EndpointMismatch(path.to_string()));
    }
    let last_switch = v
        .iter()
        .rposition(|x| snapshot.vertex_kind(x) == Some(VertexKind::Device));
    let mut rules = Vec::new();
    for (i, sw) in v.iter().enumerate() {
        if snapshot.vertex_kind(sw) != Some(VertexKind::Device) {
            continue;
        }
        let natural = match v.get(i + 1) {
            Some(next) => Some(state.port_of(sw, next).ok_or_else(|| FlowError::PortLookup {
                switch: sw.clone(),
                neighbor: next.clone(),
            })?),
            None => None,
        };
        let port = match (Some(i) == last_switch, out_port) {
            (true, Some(p)) => {
                if p == 0 || p as usize > state.port_count(sw) {
                    return Err(FlowError::BadOutPort {
                        switch: sw.clone(),
                        port: p,
                    });
                }
                Some(p)
            }
            _ => natural,
        };
        if let Some(out_port) = port {
            rules.push(FlowRule {
                switch_id: sw.clone(),
                flow_match: FlowMatch::from(flow),
                out_port,
                priority: DEFAULT_PRIORITY,
            });
        }
    }
    Ok(rules)
}

/// Convenience wrapper: compile and install in one step.
pub fn install(rules: &[FlowRule], state: &ControllerState) -> Result<ControllerState, FlowError> {
    state.install(rules)
}

/// Follows installed rules hop by hop from the flow's source.
pub fn realized_path(state: &ControllerState, flow: &FlowKey, snapshot: &InfraSnapshot) -> Result<Path, TraceError> {
    let mut vertices = vec![flow.src.clone()];
    let mut at = match snapshot.vertex_kind(&flow.src) {
        Some(VertexKind::Host) => {
            let host = snapshot.host(&flow.src).expect("kind says host");
            vertices.push(host.attached_switch.clone());
            host.attached_switch.clone()
        }
        Some(VertexKind::Device) => flow.src.clone(),
        None => return Err(TraceError::UnknownEndpoint(flow.src.clone())),
    };
    if !snapshot.has_vertex(&flow.dest) {
        return Err(TraceError::UnknownEndpoint(flow.dest.clone()));
    }
    let mut seen = BTreeSet::from([at.clone()]);
    while at != flow.dest {
        let rule = state
            .rule(&at, flow)
            .ok_or_else(|| TraceError::MissingRule { switch: at.clone() })?;
        let next = state
            .neighbor_at(&at, rule.out_port)
            .ok_or_else(|| TraceError::BadPort {
                switch: at.clone(),
                port: rule.out_port,
            })?
            .to_string();
        if next == flow.dest {
            vertices.push(next);
            break;
        }
        if snapshot.vertex_kind(&next) == Some(VertexKind::Host) {
            return Err(TraceError::Misdelivered {
                switch: at,
                host: next,
            });
        }
        if !seen.insert(next.clone()) {
            return Err(TraceError::Loop { switch: next });
        }
        vertices.push(next.clone());
        at = next;
    }
    let total_weight = vertices
        .windows(2)
        .map(|p| snapshot.link_weight(&p[0], &p[1]).unwrap_or(0.0))
        .sum();
    Ok(Path {
        vertices,
        total_weight,
    })
}

const CLAUSE_KEYS: [&str; 5] = ["src", "dest", "out_port", "forbidden", "must_go"];

/// Parses a JSON array of routing constraint objects. Unknown keys and
/// ill-typed values are schema errors; malformed JSON is a parse error.
pub fn parse_constraint_document(doc: &str) -> Result<Vec<RoutingClause>, ConstraintDocError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| ConstraintDocError::Parse(e.to_string()))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(_) => vec![value],
        _ => {
            return Err(ConstraintDocError::Schema(
                "expected an array of constraint objects".into(),
            ))
        }
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let Value::Object(map) = &item else {
                return Err(ConstraintDocError::Schema(format!("entry {i} is not an object")));
            };
            if let Some(k) = map.keys().find(|k| !CLAUSE_KEYS.contains(&k.as_str())) {
                return Err(ConstraintDocError::Schema(format!("entry {i}: unknown key `{k}`")));
            }
            let clause: RoutingClause = serde_json::from_value(item)
                .map_err(|e| ConstraintDocError::Schema(format!("entry {i}: {e}")))?;
            clause
                .validate()
                .map_err(|e| ConstraintDocError::Schema(format!("entry {i}: {e}")))?;
            Ok(clause)
        })
        .collect()
}

pub fn to_constraint_document(clauses: &[RoutingClause]) -> String {
    serde_json::to_string_pretty(clauses).expect("clauses serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::path::{plan, PathQuery};

    #[test]
    fn ports_follow_sorted_neighbors() {
        let w = fixtures::five_worker();
        let st = ControllerState::for_snapshot(&w);
        // s8 neighbors: s1 s2 s4 s7 s9
        assert_eq!(st.port_of("s8", "s1"), Some(1));
        assert_eq!(st.port_of("s8", "s4"), Some(3));
        assert_eq!(st.neighbor_at("s8", 5), Some("s9"));
        assert_eq!(st.neighbor_at("s8", 6), None);
        assert_eq!(st.neighbor_at("s8", 0), None);
    }

    #[test]
    fn compile_and_trace_round_trip() {
        let w = fixtures::five_worker();
        let flow = FlowKey::new("h2", "h4");
        let path = plan(&PathQuery::new("h2", "h4").via(["s8"]), &w).unwrap();
        let st = ControllerState::for_snapshot(&w);
        let rules = compile_flows(&path, &flow, &st, &w, None).unwrap();
        assert_eq!(rules.len(), 3);
        let st = st.install(&rules).unwrap();
        assert_eq!(realized_path(&st, &flow, &w).unwrap().vertices, path.vertices);
        // idempotent
        assert_eq!(st.install(&rules).unwrap(), st);
    }

    #[test]
    fn conflicting_rule() {
        let w = fixtures::five_worker();
        let flow = FlowKey::new("h2", "h4");
        let st = ControllerState::for_snapshot(&w);
        let a = compile_flows(&plan(&PathQuery::new("h2", "h4"), &w).unwrap(), &flow, &st, &w, None).unwrap();
        let b = compile_flows(
            &plan(&PathQuery::new("h2", "h4").via(["s8"]), &w).unwrap(),
            &flow,
            &st,
            &w,
            None,
        )
        .unwrap();
        let st = st.install(&a).unwrap();
        assert!(matches!(st.install(&b), Err(FlowError::Conflict { .. })));
    }

    #[test]
    fn trace_errors() {
        let w = fixtures::five_worker();
        let flow = FlowKey::new("h2", "h4");
        let st = ControllerState::for_snapshot(&w);
        assert_eq!(
            realized_path(&st, &flow, &w),
            Err(TraceError::MissingRule { switch: "s2".into() })
        );
        let port_back = st.port_of("s3", "s2").unwrap();
        let fwd = st.port_of("s2", "s3").unwrap();
        let looped = st
            .install(&[
                FlowRule {
                    switch_id: "s2".into(),
                    flow_match: FlowMatch::from(&flow),
                    out_port: fwd,
                    priority: DEFAULT_PRIORITY,
                },
                FlowRule {
                    switch_id: "s3".into(),
                    flow_match: FlowMatch::from(&flow),
                    out_port: port_back,
                    priority: DEFAULT_PRIORITY,
                },
            ])
            .unwrap();
        assert_eq!(
            realized_path(&looped, &flow, &w),
            Err(TraceError::Loop { switch: "s2".into() })
        );
        let to_h3 = st
            .install(&[
                FlowRule {
                    switch_id: "s2".into(),
                    flow_match: FlowMatch::from(&flow),
                    out_port: fwd,
                    priority: DEFAULT_PRIORITY,
                },
                FlowRule {
                    switch_id: "s3".into(),
                    flow_match: FlowMatch::from(&flow),
                    out_port: st.port_of("s3", "h3").unwrap(),
                    priority: DEFAULT_PRIORITY,
                },
            ])
            .unwrap();
        assert!(matches!(
            realized_path(&to_h3, &flow, &w),
            Err(TraceError::Misdelivered { .. })
        ));
    }

    #[test]
    fn out_port_override_applies_to_last_switch() {
        let w = fixtures::five_worker();
        let flow = FlowKey::new("h2", "h4");
        let st = ControllerState::for_snapshot(&w);
        let path = plan(&PathQuery::new("h2", "h4"), &w).unwrap();
        let natural = st.port_of("s4", "h4").unwrap();
        let rules = compile_flows(&path, &flow, &st, &w, Some(natural)).unwrap();
        assert_eq!(rules.last().unwrap().out_port, natural);
        assert!(matches!(
            compile_flows(&path, &flow, &st, &w, Some(99)),
            Err(FlowError::BadOutPort { .. })
        ));
    }

    #[test]
    fn constraint_document_parsing() {
        let doc = r#"[{"src":"h2","dest":"h4","out_port":2,"forbidden":["s3"],"must_go":["s8"]}]"#;
        let c = parse_constraint_document(doc).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].must_go, ["s8"]);
        assert_eq!(c[0].out_port, Some(2));
        assert!(matches!(
            parse_constraint_document(r#"[{"src":"h2","via":["s8"]}]"#),
            Err(ConstraintDocError::Schema(m)) if m.contains("via")
        ));
        assert!(matches!(
            parse_constraint_document("[{"),
            Err(ConstraintDocError::Parse(_))
        ));
        assert!(matches!(
            parse_constraint_document(r#"[{"src":"h2","out_port":"two"}]"#),
            Err(ConstraintDocError::Schema(_))
        ));
        let round = parse_constraint_document(&to_constraint_document(&c)).unwrap();
        assert_eq!(round, c);
    }
}
