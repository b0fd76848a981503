//! Parse sentences with the grammar-driven frontend.

use privacy_intent::fixtures;
use privacy_intent::frontend::{Interpreter, RuleBasedInterpreter};
use privacy_intent::infra::{condense, StateScope};

fn main() {
    let summary = condense(&fixtures::five_worker(), StateScope::Both);
    let sentences = [
        "Ensure that all traffic from host 2 to host 4 must traverse the backup switch s8.",
        "Restrict the vital sign monitor to London or Sydney nodes.",
        "Prohibit financial database service deployment in the cloud zone.",
        "Keep patient data in the EU region.",
        "Make everything private.",
    ];
    for text in sentences {
        println!("> {text}");
        match RuleBasedInterpreter.interpret(text, &summary) {
            Ok(i) => println!("  {:?} {}", i.scope, i.intent.canonical_json()),
            Err(e) => println!("  {}: {e}", e.kind()),
        }
    }
}
