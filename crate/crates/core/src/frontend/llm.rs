//! Interpreter backed by an OpenAI-compatible chat-completions endpoint.
//!
//! Four role prompts run in sequence: classifier, state checker, scheduler
//! (computing and hybrid intents) and planner (networking and hybrid). Each
//! reply must be a JSON object with exactly the expected key; a reply that
//! fails the schema is retried once.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ground, intent_id_for, InterpretError, Interpretation, Interpreter, RolePipelineTrace, TokenUsage};
use crate::infra::{SnapshotSummary, StateScope};
use crate::intent::{Domain, IntentError, PlacementClause, RoutingClause, StructuredIntent};

/// Environment variable holding the bearer credential. It is never accepted
/// as a command-line flag.
pub const API_KEY_ENV: &str = "PRIVACY_INTENT_API_KEY";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

static REQUESTS: AtomicU64 = AtomicU64::new(0);

/// Chat-completion requests issued by this process so far.
pub fn requests_sent() -> u64 {
    REQUESTS.load(Ordering::Relaxed)
}

#[derive(Clone)]
pub struct LlmConfig {
    /// Base URL (`http://host:port/v1`) or the full `/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub prompt_dir: Option<PathBuf>,
    api_key: Option<String>,
}

impl fmt::Debug for LlmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .field("prompt_dir", &self.prompt_dir)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl LlmConfig {
    /// Reads the credential from [`API_KEY_ENV`] if set.
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout: DEFAULT_TIMEOUT,
            prompt_dir: None,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_prompt_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.prompt_dir = Some(dir.into());
        self
    }

    pub fn has_credential(&self) -> bool {
        self.api_key.is_some()
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Classifier,
    StateChecker,
    Scheduler,
    Planner,
}

impl Role {
    fn file(self) -> &'static str {
        match self {
            Self::Classifier => "classifier.txt",
            Self::StateChecker => "state_checker.txt",
            Self::Scheduler => "scheduler.txt",
            Self::Planner => "planner.txt",
        }
    }

    /// Marker on the first line of each bundled template.
    pub fn marker(self) -> &'static str {
        match self {
            Self::Classifier => "[role: classifier]",
            Self::StateChecker => "[role: state-checker]",
            Self::Scheduler => "[role: scheduler]",
            Self::Planner => "[role: planner]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub classifier: String,
    pub state_checker: String,
    pub scheduler: String,
    pub planner: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            classifier: include_str!("../../data/prompts/classifier.txt").to_string(),
            state_checker: include_str!("../../data/prompts/state_checker.txt").to_string(),
            scheduler: include_str!("../../data/prompts/scheduler.txt").to_string(),
            planner: include_str!("../../data/prompts/planner.txt").to_string(),
        }
    }
}

impl Prompts {
    /// Loads templates from `dir`, falling back to the bundled one for any
    /// file that is missing.
    pub fn from_dir(dir: &FsPath) -> std::io::Result<Self> {
        let mut p = Self::default();
        for role in [Role::Classifier, Role::StateChecker, Role::Scheduler, Role::Planner] {
            let path = dir.join(role.file());
            if path.exists() {
                *p.slot(role) = std::fs::read_to_string(path)?;
            }
        }
        Ok(p)
    }

    fn slot(&mut self, role: Role) -> &mut String {
        match role {
            Role::Classifier => &mut self.classifier,
            Role::StateChecker => &mut self.state_checker,
            Role::Scheduler => &mut self.scheduler,
            Role::Planner => &mut self.planner,
        }
    }

    fn get(&self, role: Role) -> &str {
        match role {
            Role::Classifier => &self.classifier,
            Role::StateChecker => &self.state_checker,
            Role::Scheduler => &self.scheduler,
            Role::Planner => &self.planner,
        }
    }
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierReply {
    domain: Domain,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScopeReply {
    scope: StateScope,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulerReply {
    placement_clauses: Vec<PlacementClause>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerReply {
    routing_clauses: Vec<RoutingClause>,
}

trait Checked {
    fn check(&self) -> Result<(), IntentError> {
        Ok(())
    }
}
impl Checked for ClassifierReply {}
impl Checked for ScopeReply {}
impl Checked for SchedulerReply {
    fn check(&self) -> Result<(), IntentError> {
        self.placement_clauses.iter().try_for_each(PlacementClause::validate)
    }
}
impl Checked for PlannerReply {
    fn check(&self) -> Result<(), IntentError> {
        self.routing_clauses.iter().try_for_each(RoutingClause::validate)
    }
}

pub struct LlmInterpreter {
    config: LlmConfig,
    prompts: Prompts,
    agent: ureq::Agent,
}

impl fmt::Debug for LlmInterpreter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmInterpreter").field("config", &self.config).finish()
    }
}

enum CallError {
    Transport(String),
    Schema(String),
}

impl LlmInterpreter {
    pub fn new(config: LlmConfig) -> std::io::Result<Self> {
        let prompts = match &config.prompt_dir {
            Some(dir) => Prompts::from_dir(dir)?,
            None => Prompts::default(),
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, prompts, agent })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn post(&self, system: &str, user: &str, usage: &mut TokenUsage) -> Result<String, CallError> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.agent.post(self.config.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        REQUESTS.fetch_add(1, Ordering::Relaxed);
        let mut resp = req
            .send_json(&body)
            .map_err(|e| CallError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| CallError::Transport(e.to_string()))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(CallError::Transport(format!("HTTP {}: {snippet}", status.as_u16())));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CallError::Transport(format!("response is not JSON: {e}")))?;
        if let Some(u) = value.get("usage") {
            usage.prompt += u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0);
            usage.completion += u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0);
        }
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| CallError::Schema("reply has no choices[0].message.content".into()))
    }

    fn call<T: DeserializeOwned + Checked>(
        &self,
        role: Role,
        vars: &[(&str, &str)],
        text: &str,
        usage: &mut TokenUsage,
        trace: &mut RolePipelineTrace,
    ) -> Result<(T, Value), InterpretError> {
        let system = render(self.prompts.get(role), vars);
        let mut last = String::new();
        for attempt in 0..2 {
            if attempt > 0 {
                trace.retries += 1;
            }
            trace.calls += 1;
            let content = match self.post(&system, text, usage) {
                Ok(c) => c,
                Err(CallError::Transport(e)) => {
                    return Err(InterpretError::BackendFailure(format!("{role:?}: {e}")))
                }
                Err(CallError::Schema(e)) => {
                    last = e;
                    continue;
                }
            };
            match parse_reply::<T>(&content) {
                Ok(ok) => return Ok(ok),
                Err(e) => last = e,
            }
        }
        Err(InterpretError::BackendFailure(format!(
            "{role:?} reply violated its schema twice: {last}"
        )))
    }
}

fn strip_fences(s: &str) -> &str {
    let t = s.trim();
    let t = t.strip_prefix("```json").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

fn parse_reply<T: DeserializeOwned + Checked>(content: &str) -> Result<(T, Value), String> {
    let value: Value = serde_json::from_str(strip_fences(content)).map_err(|e| e.to_string())?;
    let parsed: T = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    parsed.check().map_err(|e| e.to_string())?;
    Ok((parsed, value))
}

impl Interpreter for LlmInterpreter {
    fn name(&self) -> &str {
        "llm"
    }

    fn interpret(&self, text: &str, summary: &SnapshotSummary) -> Result<Interpretation, InterpretError> {
        let mut usage = TokenUsage::default();
        let mut trace = RolePipelineTrace::default();

        let (ClassifierReply { domain }, _) = self.call(Role::Classifier, &[], text, &mut usage, &mut trace)?;
        trace.classifier_output = Some(domain);

        let (ScopeReply { scope }, _) = self.call(
            Role::StateChecker,
            &[("domain", domain.as_str())],
            text,
            &mut usage,
            &mut trace,
        )?;
        trace.scope = Some(scope);
        let scoped = summary.restrict(scope);
        let summary_json = scoped.to_json();

        let mut placement = Vec::new();
        let mut routing = Vec::new();
        if matches!(domain, Domain::Computing | Domain::Hybrid) {
            let (reply, raw): (SchedulerReply, _) = self.call(
                Role::Scheduler,
                &[("summary", &summary_json), ("domain", domain.as_str())],
                text,
                &mut usage,
                &mut trace,
            )?;
            trace.scheduler_output = Some(raw);
            placement = reply.placement_clauses;
        }
        if matches!(domain, Domain::Networking | Domain::Hybrid) {
            let (reply, raw): (PlannerReply, _) = self.call(
                Role::Planner,
                &[("summary", &summary_json), ("domain", domain.as_str())],
                text,
                &mut usage,
                &mut trace,
            )?;
            trace.planner_output = Some(raw);
            routing = reply.routing_clauses;
        }

        let mix = Domain::from_clause_mix(placement.len(), routing.len());
        if mix != Some(domain) {
            return Err(InterpretError::BackendFailure(format!(
                "classifier said {domain} but the role outputs form {}",
                mix.map_or("no clauses".to_string(), |d| d.to_string())
            )));
        }
        let intent = StructuredIntent::from_clauses(intent_id_for(text), placement, routing, Some(text.to_string()))
            .map_err(|e| InterpretError::BackendFailure(e.to_string()))?;
        ground(&intent, &scoped)?;
        Ok(Interpretation {
            intent,
            scope,
            trace: Some(trace),
            tokens: Some(usage),
        })
    }
}

pub mod mock {
    //! A minimal local chat-completions server for tests and offline demos.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{SocketAddr, TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
    use std::sync::Arc;
    use std::thread::JoinHandle;
    use std::time::Duration;

    use serde_json::{json, Value};

    use super::Role;

    #[derive(Debug, Clone)]
    pub enum MockReply {
        Content {
            content: String,
            prompt_tokens: u64,
            completion_tokens: u64,
        },
        Status(u16),
    }

    impl MockReply {
        pub fn json(value: Value) -> Self {
            Self::Content {
                content: value.to_string(),
                prompt_tokens: 100,
                completion_tokens: 20,
            }
        }
    }

    /// What the server saw in one request.
    #[derive(Debug, Clone)]
    pub struct MockRequest {
        pub role: Option<Role>,
        pub system: String,
        pub user: String,
        pub authorization: Option<String>,
    }

    type Responder = dyn Fn(&MockRequest) -> MockReply + Send + Sync;

    pub struct MockChatServer {
        addr: SocketAddr,
        stop: Arc<AtomicBool>,
        served: Arc<AtomicU64>,
        handle: Option<JoinHandle<()>>,
    }

    impl MockChatServer {
        pub fn start(responder: impl Fn(&MockRequest) -> MockReply + Send + Sync + 'static) -> std::io::Result<Self> {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            listener.set_nonblocking(true)?;
            let addr = listener.local_addr()?;
            let stop = Arc::new(AtomicBool::new(false));
            let served = Arc::new(AtomicU64::new(0));
            let responder: Arc<Responder> = Arc::new(responder);
            let (stop2, served2) = (stop.clone(), served.clone());
            let handle = std::thread::spawn(move || {
                while !stop2.load(Ordering::Relaxed) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            served2.fetch_add(1, Ordering::Relaxed);
                            let _ = serve(stream, responder.as_ref());
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(2));
                        }
                        Err(_) => break,
                    }
                }
            });
            Ok(Self {
                addr,
                stop,
                served,
                handle: Some(handle),
            })
        }

        /// Answers each role with a fixed JSON value; roles left out get HTTP 500.
        pub fn scripted(
            classifier: Value,
            state_checker: Value,
            scheduler: Option<Value>,
            planner: Option<Value>,
        ) -> std::io::Result<Self> {
            Self::start(move |req| {
                let v = match req.role {
                    Some(Role::Classifier) => Some(classifier.clone()),
                    Some(Role::StateChecker) => Some(state_checker.clone()),
                    Some(Role::Scheduler) => scheduler.clone(),
                    Some(Role::Planner) => planner.clone(),
                    None => None,
                };
                v.map_or(MockReply::Status(500), MockReply::json)
            })
        }

        pub fn endpoint(&self) -> String {
            format!("http://{}/v1", self.addr)
        }

        pub fn requests_served(&self) -> u64 {
            self.served.load(Ordering::Relaxed)
        }
    }

    impl Drop for MockChatServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::Relaxed);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn serve(stream: TcpStream, responder: &Responder) -> std::io::Result<()> {
        stream.set_nonblocking(false)?;
        stream.set_read_timeout(Some(Duration::from_secs(5)))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut content_length = 0usize;
        let mut authorization = None;
        let mut line = String::new();
        reader.read_line(&mut line)?;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 || line == "\r\n" {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                let value = value.trim();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => content_length = value.parse().unwrap_or(0),
                    "authorization" => authorization = Some(value.to_string()),
                    _ => {}
                }
            }
        }
        let mut body = vec![0; content_length];
        reader.read_exact(&mut body)?;
        let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        let message = |role: &str| {
            request["messages"]
                .as_array()
                .and_then(|m| m.iter().find(|x| x["role"] == role))
                .and_then(|x| x["content"].as_str())
                .unwrap_or_default()
                .to_string()
        };
        let system = message("system");
        let role = [Role::Classifier, Role::StateChecker, Role::Scheduler, Role::Planner]
            .into_iter()
            .find(|r| system.contains(r.marker()));
        let req = MockRequest {
            role,
            user: message("user"),
            system,
            authorization,
        };
        let (status, payload) = match responder(&req) {
            MockReply::Content {
                content,
                prompt_tokens,
                completion_tokens,
            } => (
                200,
                json!({
                    "id": "mock",
                    "object": "chat.completion",
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
                    "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens,
                              "total_tokens": prompt_tokens + completion_tokens},
                })
                .to_string(),
            ),
            MockReply::Status(code) => (code, json!({"error": {"message": "mock failure"}}).to_string()),
        };
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            if status == 200 { "OK" } else { "Error" },
            payload.len()
        )?;
        stream.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{MockChatServer, MockReply};
    use super::*;
    use crate::fixtures;
    use crate::infra::condense;
    use std::sync::atomic::AtomicU32;
    use std::sync::Arc;

    fn summary() -> SnapshotSummary {
        condense(&fixtures::five_worker(), StateScope::Both)
    }

    fn interp(server: &MockChatServer) -> LlmInterpreter {
        LlmInterpreter::new(LlmConfig::new(server.endpoint(), "mock-model").with_timeout(Duration::from_secs(5)))
            .unwrap()
    }

    #[test]
    fn networking_pipeline_with_fig5_shaped_reply() {
        let server = MockChatServer::scripted(
            json!({"domain": "networking"}),
            json!({"scope": "network"}),
            None,
            Some(json!({"routing_clauses": [{"src": "h2", "dest": "h4", "forbidden": [], "must_go": ["s8"]}]})),
        )
        .unwrap();
        let out = interp(&server)
            .interpret("all traffic from host 2 to host 4 must traverse s8", &summary())
            .unwrap();
        assert_eq!(out.intent.routing_clauses[0].must_go, ["s8"]);
        assert_eq!(out.scope, StateScope::Network);
        assert_eq!(out.tokens.unwrap().total(), 3 * 120);
        assert_eq!(out.trace.unwrap().calls, 3);
    }

    #[test]
    fn hallucinated_label_is_unknown_identifier() {
        let server = MockChatServer::scripted(
            json!({"domain": "computing"}),
            json!({"scope": "compute"}),
            Some(json!({"placement_clauses": [{
                "workload_selector": [{"key": "app", "op": "equals", "values": ["patient"]}],
                "mode": "require",
                "node_predicates": [{"key": "region", "op": "equals", "values": ["eu_region"]}]
            }]})),
            None,
        )
        .unwrap();
        let err = interp(&server).interpret("keep patient data in the eu", &summary()).unwrap_err();
        assert_eq!(err, InterpretError::UnknownIdentifier("region=eu_region".into()));
    }

    #[test]
    fn schema_violation_is_retried_once() {
        let attempts = Arc::new(AtomicU32::new(0));
        let seen = attempts.clone();
        let server = MockChatServer::start(move |req| match req.role {
            Some(Role::Classifier) => {
                if seen.fetch_add(1, Ordering::SeqCst) == 0 {
                    MockReply::json(json!({"domain": "networking", "confidence": 0.9}))
                } else {
                    MockReply::json(json!({"domain": "networking"}))
                }
            }
            Some(Role::StateChecker) => MockReply::json(json!({"scope": "network"})),
            _ => MockReply::json(json!({"routing_clauses": [{"src": "h1", "dest": "h3", "must_go": ["s7"]}]})),
        })
        .unwrap();
        let out = interp(&server).interpret("x", &summary()).unwrap();
        assert_eq!(out.trace.unwrap().retries, 1);
        assert_eq!(attempts.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn persistent_schema_violation_fails() {
        let server = MockChatServer::start(|_| MockReply::json(json!({"unexpected": true}))).unwrap();
        let err = interp(&server).interpret("x", &summary()).unwrap_err();
        assert!(matches!(err, InterpretError::BackendFailure(_)));
    }

    #[test]
    fn http_error_is_backend_failure() {
        let server = MockChatServer::start(|_| MockReply::Status(503)).unwrap();
        let err = interp(&server).interpret("x", &summary()).unwrap_err();
        assert!(matches!(err, InterpretError::BackendFailure(m) if m.contains("503")));
    }

    #[test]
    fn inconsistent_classifier_fails_closed() {
        let server = MockChatServer::scripted(
            json!({"domain": "hybrid"}),
            json!({"scope": "both"}),
            Some(json!({"placement_clauses": []})),
            Some(json!({"routing_clauses": [{"src": "h1", "dest": "h3", "must_go": ["s7"]}]})),
        )
        .unwrap();
        let err = interp(&server).interpret("x", &summary()).unwrap_err();
        assert!(matches!(err, InterpretError::BackendFailure(_)));
    }

    #[test]
    fn templates_render_and_carry_markers() {
        let p = Prompts::default();
        for role in [Role::Classifier, Role::StateChecker, Role::Scheduler, Role::Planner] {
            assert!(p.get(role).starts_with(role.marker()));
        }
        let r = render(&p.scheduler, &[("summary", "{}")]);
        assert!(!r.contains("{{summary}}"));
    }

    #[test]
    fn credential_is_redacted_in_debug() {
        let mut c = LlmConfig::new("http://x", "m");
        c.api_key = Some("secret".into());
        assert!(!format!("{c:?}").contains("secret"));
    }
}
