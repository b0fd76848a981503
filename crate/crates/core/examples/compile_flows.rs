//! Compile a path into per-switch rules, install them and trace the result.

use privacy_intent::fixtures;
use privacy_intent::flow::{compile_flows, install, realized_path, to_constraint_document, ControllerState};
use privacy_intent::intent::{FlowKey, RoutingClause};
use privacy_intent::path::{plan, PathQuery};

fn main() {
    let world = fixtures::five_worker();
    let flow = FlowKey::new("h2", "h4");
    let path = plan(&PathQuery::new("h2", "h4").via(["s8"]), &world).expect("path exists");
    let state = ControllerState::for_snapshot(&world);
    let rules = compile_flows(&path, &flow, &state, &world, None).expect("rules compile");
    println!("{}", serde_json::to_string_pretty(&rules).unwrap());
    let state = install(&rules, &state).expect("no conflicts");
    println!("planned:  {path}");
    println!("realized: {}", realized_path(&state, &flow, &world).expect("trace succeeds"));
    let clause = RoutingClause::between("h2", "h4").via(["s8"]);
    println!("constraint document: {}", to_constraint_document(&[clause]));
}
