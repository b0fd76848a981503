//! Build a structured intent by hand and evaluate it against a configuration.

use privacy_intent::fixtures;
use privacy_intent::flow::{compile_flows, ControllerState};
use privacy_intent::intent::{
    satisfies, Configuration, FlowKey, LabelPredicate, PlacementClause, RoutingClause, Satisfaction, StructuredIntent,
};
use privacy_intent::path::{plan, PathQuery};

fn main() {
    let world = fixtures::five_worker();
    let intent = StructuredIntent::from_clauses(
        "demo",
        vec![PlacementClause::forbid(
            vec![LabelPredicate::equals("data-type", "phi")],
            vec![LabelPredicate::equals("provider", "alibaba-cloud")],
        )],
        vec![RoutingClause::between("h2", "h4").via(["s8"])],
        None,
    )
    .expect("well-formed intent");
    println!("{}", intent.canonical_json());

    // Current placements, no flow rules yet: routing cannot hold.
    let mut config = Configuration {
        sigma: world.placements().clone(),
        ..Configuration::default()
    };
    report("before routing", &satisfies(&config, &intent, &world));

    let flow = FlowKey::new("h2", "h4");
    let path = plan(&PathQuery::new("h2", "h4").via(["s8"]), &world).expect("path exists");
    let state = ControllerState::for_snapshot(&world);
    config.realized_flows = compile_flows(&path, &flow, &state, &world, None).expect("rules compile");
    config.rho = intent.routing_clauses.clone();
    report("after routing", &satisfies(&config, &intent, &world));
}

fn report(label: &str, s: &Satisfaction) {
    match s {
        Satisfaction::Pass => println!("{label}: satisfied"),
        Satisfaction::Fail(v) => {
            println!("{label}: {} violation(s)", v.len());
            for x in v {
                println!("  {:?} {}: {}", x.kind, x.subject, x.reason);
            }
        }
    }
}
