//! Natural language to structured intents.
//!
//! Two interchangeable backends: a deterministic grammar-driven parser and a
//! client for an OpenAI-compatible chat-completions endpoint. Both ground
//! their output against the condensed world summary before returning it.

pub mod grammar;
pub mod llm;
pub mod rule_based;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infra::{SnapshotSummary, StateScope};
use crate::intent::{DeviceSelector, Domain, StructuredIntent};

pub use grammar::{grammar_spec, Grammar};
pub use llm::{LlmConfig, LlmInterpreter};
pub use rule_based::RuleBasedInterpreter;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpretError {
    #[error("unparseable: {0}")]
    Unparseable(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("ambiguous reference: {0}")]
    AmbiguousEndpoints(String),
    #[error("backend failure: {0}")]
    BackendFailure(String),
}

impl InterpretError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Unparseable(_) => "unparseable",
            Self::UnknownIdentifier(_) => "unknown-identifier",
            Self::AmbiguousEndpoints(_) => "ambiguous-endpoints",
            Self::BackendFailure(_) => "backend-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }

    pub fn add(&mut self, other: TokenUsage) {
        self.prompt += other.prompt;
        self.completion += other.completion;
    }
}

/// What each role of the LLM pipeline produced, kept for inspection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolePipelineTrace {
    pub classifier_output: Option<Domain>,
    pub scope: Option<StateScope>,
    pub scheduler_output: Option<serde_json::Value>,
    pub planner_output: Option<serde_json::Value>,
    pub calls: u32,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub intent: StructuredIntent,
    pub scope: StateScope,
    pub trace: Option<RolePipelineTrace>,
    pub tokens: Option<TokenUsage>,
}

pub trait Interpreter: Send + Sync {
    fn name(&self) -> &str;

    /// Translates `text` into a grounded intent. `summary` is the full world
    /// view; backends narrow it to the scope they need.
    fn interpret(&self, text: &str, summary: &SnapshotSummary) -> Result<Interpretation, InterpretError>;
}

/// Rejects intents that cite entities or labels absent from the summary.
/// Workload selector values are left unchecked: a selector naming a workload
/// that does not exist is well-formed and is reported as unenforceable later.
pub fn ground(intent: &StructuredIntent, summary: &SnapshotSummary) -> Result<(), InterpretError> {
    let unknown = |s: String| Err(InterpretError::UnknownIdentifier(s));
    for clause in &intent.placement_clauses {
        for p in &clause.workload_selector {
            if !summary.has_workload_label_key(&p.key) {
                return unknown(p.key.clone());
            }
        }
        for p in &clause.node_predicates {
            let values = summary.node_label_values(&p.key);
            if values.is_empty() {
                return unknown(format!("{}={}", p.key, p.values.join(",")));
            }
            if let Some(v) = p.values.iter().find(|v| !values.contains(v.as_str())) {
                return unknown(format!("{}={v}", p.key));
            }
        }
    }
    for clause in &intent.routing_clauses {
        for ep in [&clause.src, &clause.dest].into_iter().flatten() {
            if !summary.has_host(ep) && !summary.has_device(ep) && !summary.has_workload(ep) {
                return unknown(ep.clone());
            }
        }
        for w in &clause.must_go {
            if !summary.has_device(w) {
                return unknown(w.clone());
            }
        }
        for f in &clause.forbidden {
            match f {
                DeviceSelector::Id(id) if !summary.has_device(id) => return unknown(id.clone()),
                DeviceSelector::Id(_) => {}
                DeviceSelector::Label(p) => {
                    let values = summary.device_label_values(&p.key);
                    if let Some(v) = p.values.iter().find(|v| !values.contains(v.as_str())) {
                        return unknown(format!("{}={v}", p.key));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Scope of world state an intent of this domain needs.
pub fn scope_for(domain: Domain) -> StateScope {
    match domain {
        Domain::Computing => StateScope::Compute,
        Domain::Networking => StateScope::Network,
        Domain::Hybrid => StateScope::Both,
    }
}

/// `intent-` followed by the first 12 hex digits of the text's SHA-256.
pub fn intent_id_for(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("intent-{hex}")
}

/// Syntax-only domain classification with the rule grammar.
pub fn classify(text: &str) -> Result<Domain, InterpretError> {
    rule_based::classify(text)
}
