//! Benchmark the bundled corpus and score the frontend against gold intents.

use privacy_intent::fixtures;
use privacy_intent::frontend::RuleBasedInterpreter;
use privacy_intent::harness::{bundled_corpus, run_corpus, score_frontend, BenchOptions};

fn main() {
    let records = bundled_corpus();
    let world = fixtures::five_worker();
    let options = BenchOptions {
        parallelism: 4,
        ..BenchOptions::default()
    };
    let report = run_corpus(&records, &world, &RuleBasedInterpreter, &options).expect("bench runs");
    print!("{}", report.table());
    let score = score_frontend(&records, &world, &RuleBasedInterpreter, 4).expect("records carry gold");
    println!("frontend exact match: {}/{}", score.matched, score.total);
}
