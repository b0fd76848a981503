//! Run the validator on a good deployment and on a tampered one.

use privacy_intent::frontend::RuleBasedInterpreter;
use privacy_intent::orchestrator::{Orchestrator, World};
use privacy_intent::validator::{validate, PostState};
use privacy_intent::{fixtures, infra::ReplicaId};

fn main() {
    let world = World::new(fixtures::five_worker());
    let text = "Keep patient data in London; traffic from host 1 to host 4 must avoid untrusted switches.";
    let out = Orchestrator::new(&RuleBasedInterpreter).execute(text, &world);
    let intent = out.intent.clone().expect("interpreted");
    println!("as deployed: {:?}", out.report.verdict);

    // Move the patient replica somewhere the intent forbids.
    let moved = out
        .world
        .snapshot
        .with_placements([(ReplicaId::new("patient", 0), "worker-5".to_string())])
        .expect("valid move");
    let post = PostState {
        snapshot: &moved,
        controller: &out.world.controller,
        manifests: &out.configuration.manifests,
    };
    let report = validate(&intent, &post);
    println!("after tampering: {:?}", report.verdict);
    for c in report.failed() {
        println!("  {} {}: {}", c.kind, c.subject, serde_json::to_string(&c.evidence).unwrap());
    }
}
