//! Full control loop for a hybrid intent, with the stage log.

use std::time::Duration;

use privacy_intent::fixtures;
use privacy_intent::frontend::RuleBasedInterpreter;
use privacy_intent::orchestrator::{Orchestrator, OrchestratorConfig, World};

fn main() {
    let config = OrchestratorConfig {
        stabilization_delay: Duration::from_millis(5),
        ..OrchestratorConfig::default()
    };
    let orchestrator = Orchestrator::with_config(&RuleBasedInterpreter, config);
    let text = "Run appointment only on high-security cloud nodes, enforce that all other hosts communicating \
        with host 4 must pass through the backup switch s8, and prevent sensitive databases from being deployed \
        in the edge zone.";
    let out = orchestrator.execute(text, &World::new(fixtures::five_worker()));
    for s in &out.stages {
        println!("{} {:<14} {:?} {:.3} ms", s.seq, s.stage.as_str(), s.status, s.elapsed_s * 1e3);
    }
    println!("verdict {:?}, {} checks", out.report.verdict, out.report.checks_executed);
    for p in &out.flow_plans {
        println!("  {} : {}", p.flow, p.path.as_ref().map(ToString::to_string).unwrap_or_default());
    }
    print!("{}", out.manifest_yaml);
}
