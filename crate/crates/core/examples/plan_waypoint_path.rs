//! Plan constrained paths: waypoints in order, forbidden switches, hop metric.

use privacy_intent::fixtures;
use privacy_intent::path::{plan, plan_detailed, PathQuery, WeightMode};

fn main() {
    let world = fixtures::five_worker();
    let queries = [
        PathQuery::new("h2", "h4"),
        PathQuery::new("h2", "h4").via(["s8"]),
        PathQuery::new("h2", "h4").via(["s8", "s7"]),
        PathQuery::new("h1", "h4").avoiding(["s3", "s5", "s9"]),
        PathQuery::new("h1", "h4").via(["s8"]).with_mode(WeightMode::Hops),
    ];
    for q in &queries {
        match plan_detailed(q, &world) {
            Ok((path, strategy)) => println!("{} -> {}: {path} (weight {}, {strategy:?})", q.src, q.dest, path.total_weight),
            Err(e) => println!("{} -> {}: {e}", q.src, q.dest),
        }
    }
    let cut = world.without_links_of("s8");
    println!("with s8 isolated: {}", plan(&queries[1], &cut).unwrap_err());
}
