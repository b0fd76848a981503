//! Drive the LLM frontend. Without PRIVACY_INTENT_ENDPOINT set, a local mock
//! server answers with canned role replies.

use privacy_intent::fixtures;
use privacy_intent::frontend::llm::mock::MockChatServer;
use privacy_intent::frontend::{Interpreter, LlmConfig, LlmInterpreter};
use privacy_intent::infra::{condense, StateScope};
use serde_json::json;

fn main() {
    let text = "Ensure that all traffic from host 2 to host 4 must traverse the backup switch s8.";
    let (_server, endpoint) = match std::env::var("PRIVACY_INTENT_ENDPOINT") {
        Ok(url) => (None, url),
        Err(_) => {
            let server = MockChatServer::scripted(
                json!({"domain": "networking"}),
                json!({"scope": "network"}),
                None,
                Some(json!({
                    "routing_clauses": [{"src": "h2", "dest": "h4", "must_go": ["s8"]}]
                })),
            )
            .expect("mock server starts");
            let url = server.endpoint();
            (Some(server), url)
        }
    };
    let interpreter = LlmInterpreter::new(LlmConfig::new(endpoint, "gpt-4o")).expect("prompts load");
    let summary = condense(&fixtures::five_worker(), StateScope::Both);
    match interpreter.interpret(text, &summary) {
        Ok(i) => {
            println!("{}", i.intent.canonical_json());
            if let Some(t) = i.tokens {
                println!("tokens: {} prompt + {} completion", t.prompt, t.completion);
            }
        }
        Err(e) => println!("{}: {e}", e.kind()),
    }
}
