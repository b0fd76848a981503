mod common;

use privacy_intent::fixtures;
use privacy_intent::infra::{InfraSnapshot, NodeEntry};
use privacy_intent::intent::{satisfies_placement, LabelPredicate, PlacementClause, PlacementMode};
use privacy_intent::placement::{
    build_manifests, compile_placement, feasible_nodes, parse_manifests, render_yaml, schedule, PlacementError,
};
use proptest::prelude::*;

const NODE_KEYS: [(&str, &[&str]); 4] = [
    ("location", &["london", "newyork", "sanfrancisco", "sydney", "beijing", "paris"]),
    ("provider", &["aws", "azure", "alibaba-cloud"]),
    ("security", &["high", "medium", "low"]),
    ("zone", &["edge", "cloud"]),
];

fn selector_strategy() -> impl Strategy<Value = Vec<LabelPredicate>> {
    prop_oneof![
        prop::sample::select(vec!["appointment", "doctor", "patient", "vital-sign-monitor", "phi-db", "general-db"])
            .prop_map(|a| vec![LabelPredicate::equals("app", a)]),
        prop::sample::select(vec!["phi", "general"]).prop_map(|d| vec![LabelPredicate::equals("data-type", d)]),
        prop::sample::select(vec!["database", "application", "auxiliary"])
            .prop_map(|t| vec![LabelPredicate::equals("tier", t)]),
        (prop::sample::select(vec!["phi", "general"]), prop::sample::select(vec!["database", "application"]))
            .prop_map(|(d, t)| vec![LabelPredicate::equals("data-type", d), LabelPredicate::equals("tier", t)]),
    ]
}

fn predicate_strategy() -> impl Strategy<Value = LabelPredicate> {
    (0usize..4, 0usize..3, any::<prop::sample::Index>(), any::<prop::sample::Index>()).prop_map(|(k, op, a, b)| {
        let (key, values) = NODE_KEYS[k];
        let (va, vb) = (values[a.index(values.len())], values[b.index(values.len())]);
        match op {
            0 => LabelPredicate::equals(key, va),
            1 => LabelPredicate::not_equals(key, va),
            _ => {
                let mut set = vec![va.to_string(), vb.to_string()];
                set.sort();
                set.dedup();
                LabelPredicate::in_set(key, set)
            }
        }
    })
}

fn clause_strategy() -> impl Strategy<Value = PlacementClause> {
    (selector_strategy(), any::<bool>(), prop::collection::vec(predicate_strategy(), 1..3)).prop_map(
        |(sel, require, preds)| {
            if require {
                PlacementClause::require(sel, preds)
            } else {
                PlacementClause::forbid(sel, preds)
            }
        },
    )
}

/// The five-worker fixture with node capacities lowered, but never below the
/// baseline load so the fixture stays valid.
fn with_capacities(caps: &[u32]) -> InfraSnapshot {
    let base = fixtures::five_worker();
    let loads = base.node_loads();
    let mut doc = base.to_document();
    doc.nodes = doc
        .nodes
        .into_iter()
        .zip(caps)
        .map(|(n, &c)| NodeEntry {
            capacity: Some(c.max(loads.get(&n.id).copied().unwrap_or(0))),
            ..n
        })
        .collect();
    InfraSnapshot::from_document(doc).unwrap()
}

fn check(world: &InfraSnapshot, clauses: &[PlacementClause]) -> Result<(), TestCaseError> {
    let selected = common::selected_workloads(world, clauses);
    let every_clause_selects = clauses
        .iter()
        .all(|c| world.workloads().any(|w| common::holds_all(&c.workload_selector, &w.labels)));
    let directives = match compile_placement(clauses, world) {
        Ok(d) => d,
        Err(PlacementError::NoMatchingWorkload(_)) => {
            prop_assert!(!every_clause_selects);
            return Ok(());
        }
        Err(e) => return Err(TestCaseError::fail(format!("unexpected {e}"))),
    };
    prop_assert!(every_clause_selects);
    let ids: std::collections::BTreeSet<String> = directives.iter().map(|d| d.workload_id.clone()).collect();
    prop_assert_eq!(&ids, &selected);
    for d in &directives {
        prop_assert_eq!(feasible_nodes(d, world), common::compliant_nodes(world, clauses, &d.workload_id));
    }
    let optimum = common::brute_force_max_load(world, clauses);
    match schedule(&directives, world) {
        Ok(result) => {
            prop_assert_eq!(Some(result.max_load), optimum);
            let after = world.with_placements(result.assignments.clone()).unwrap();
            prop_assert!(satisfies_placement(after.placements(), clauses, &after).is_empty());
            for n in world.nodes() {
                prop_assert!(result.per_node_load[&n.id] <= n.capacity);
            }
            let docs = build_manifests(&result, &directives, world);
            prop_assert_eq!(parse_manifests(&render_yaml(&docs)).unwrap(), docs);
        }
        Err(PlacementError::Infeasible(_) | PlacementError::CapacityExhausted(_)) => prop_assert_eq!(optimum, None),
        Err(e) => return Err(TestCaseError::fail(format!("unexpected {e}"))),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedule_matches_brute_force(clauses in prop::collection::vec(clause_strategy(), 1..4)) {
        check(&fixtures::five_worker(), &clauses)?;
    }

    #[test]
    fn schedule_matches_brute_force_under_tight_capacity(
        clauses in prop::collection::vec(clause_strategy(), 1..3),
        caps in prop::collection::vec(1u32..4, 5),
    ) {
        check(&with_capacities(&caps), &clauses)?;
    }
}

#[test]
fn forbid_keeps_replicas_off_matching_nodes() {
    let world = fixtures::five_worker();
    let clause = PlacementClause::forbid(
        vec![LabelPredicate::equals("data-type", "phi")],
        vec![LabelPredicate::equals("zone", "edge")],
    );
    assert_eq!(clause.mode, PlacementMode::Forbid);
    let directives = compile_placement(std::slice::from_ref(&clause), &world).unwrap();
    let result = schedule(&directives, &world).unwrap();
    for (replica, node) in &result.assignments {
        let zone = world.node(node).unwrap().labels.get("zone").unwrap();
        assert_eq!(zone, "cloud", "{replica} landed on {node}");
    }
}
