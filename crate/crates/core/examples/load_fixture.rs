//! Load the bundled testbeds and print their shape.

use privacy_intent::fixtures;
use privacy_intent::infra::{condense, StateScope};

fn main() {
    for (name, world) in [("five-worker", fixtures::five_worker()), ("thirteen-worker", fixtures::thirteen_worker())] {
        println!(
            "{name}: {} nodes, {} switches, {} hosts, {} links",
            world.nodes().count(),
            world.devices().count(),
            world.hosts().count(),
            world.links().len()
        );
    }
    let world = fixtures::five_worker();
    for node in world.nodes() {
        let labels: Vec<String> = node.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("  {} {}", node.id, labels.join(" "));
    }
    // The condensed view is what a frontend gets to see.
    let summary = condense(&world, StateScope::Compute);
    println!("compute summary: {} bytes of JSON", summary.to_json().len());
}
