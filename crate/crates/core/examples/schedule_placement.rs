//! Compile placement clauses, schedule replicas and render manifests.

use privacy_intent::fixtures;
use privacy_intent::intent::{LabelPredicate, PlacementClause};
use privacy_intent::placement::{build_manifests, compile_placement, feasible_nodes, render_yaml, schedule};

fn main() {
    let world = fixtures::five_worker();
    let clauses = [
        PlacementClause::require(
            vec![LabelPredicate::equals("app", "appointment")],
            vec![LabelPredicate::equals("security", "high"), LabelPredicate::equals("zone", "cloud")],
        ),
        PlacementClause::forbid(
            vec![LabelPredicate::equals("data-type", "phi")],
            vec![LabelPredicate::equals("zone", "edge")],
        ),
    ];
    let directives = compile_placement(&clauses, &world).expect("clauses compile");
    for d in &directives {
        println!("{} -> {:?}", d.workload_id, feasible_nodes(d, &world));
    }
    let result = schedule(&directives, &world).expect("schedulable");
    println!("max load {}", result.max_load);
    for (replica, node) in &result.assignments {
        println!("  {replica} -> {node}");
    }
    print!("{}", render_yaml(&build_manifests(&result, &directives, &world)));
}
