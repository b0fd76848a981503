mod common;

use std::collections::BTreeSet;

use privacy_intent::fixtures;
use privacy_intent::flow::{compile_flows, realized_path, ControllerState};
use privacy_intent::intent::FlowKey;
use privacy_intent::path::{plan, plan_detailed, PathQuery, PlanError, Strategy};
use proptest::prelude::*;

fn check_against_oracle(world: &privacy_intent::infra::InfraSnapshot, q: &PathQuery) -> Result<(), TestCaseError> {
    let oracle = common::oracle_path(world, &q.src, &q.dest, &q.must_go, &q.forbidden);
    match (plan(q, world), oracle) {
        (Ok(p), Some((best, weight))) => {
            prop_assert!((p.total_weight - weight).abs() < 1e-9, "{q:?}: {} vs {weight}", p.total_weight);
            prop_assert_eq!(&p.vertices, &best, "tie-break differs for {:?}", q);
            prop_assert!(p.is_simple());
            prop_assert!(common::path_admissible(&p.vertices, &q.must_go, &q.forbidden));
        }
        (Err(PlanError::Infeasible { .. }), None) => {}
        (got, want) => prop_assert!(false, "{q:?}: planner {got:?}, oracle {want:?}"),
    }
    Ok(())
}

#[test]
fn waypoint_pairs_match_oracle_on_five_worker() {
    let world = fixtures::five_worker();
    let switches: Vec<String> = world.devices().map(|d| d.id.clone()).collect();
    let hosts: Vec<String> = world.hosts().map(|h| h.id.clone()).collect();
    for (a, b) in [("h1", "h5"), ("h3", "h2")] {
        for w1 in &switches {
            for w2 in &switches {
                if w1 == w2 {
                    continue;
                }
                let q = PathQuery::new(a, b).via([w1.clone(), w2.clone()]);
                check_against_oracle(&world, &q).unwrap();
            }
        }
    }
    assert_eq!(hosts.len(), 5);
}

#[test]
fn restricted_search_failure_falls_back_to_exhaustive() {
    // Some waypoint orders cannot be met by gluing per-segment optima
    // together; those must still come back, via the exhaustive search.
    let world = fixtures::five_worker();
    let mut used_exhaustive = false;
    let switches: Vec<String> = world.devices().map(|d| d.id.clone()).collect();
    'outer: for w1 in &switches {
        for w2 in &switches {
            if w1 == w2 {
                continue;
            }
            let q = PathQuery::new("h1", "h2").via([w1.clone(), w2.clone()]);
            if let Ok((_, Strategy::Exhaustive)) = plan_detailed(&q, &world) {
                used_exhaustive = true;
                break 'outer;
            }
        }
    }
    assert!(used_exhaustive, "no two-waypoint query needed the exhaustive search");
}

#[test]
fn thirteen_worker_paths_are_valid_and_round_trip() {
    let world = fixtures::thirteen_worker();
    let state = ControllerState::for_snapshot(&world);
    for (a, b, via) in [("h1", "h13", vec!["s8"]), ("h6", "h2", vec!["s20", "s8"]), ("h10", "h3", vec![])] {
        let q = PathQuery::new(a, b).via(via.iter().map(|s| s.to_string()));
        let p = plan(&q, &world).unwrap();
        assert!(common::path_admissible(&p.vertices, &q.must_go, &q.forbidden));
        let flow = FlowKey::new(a, b);
        let rules = compile_flows(&p, &flow, &state, &world, None).unwrap();
        let installed = state.install(&rules).unwrap();
        assert_eq!(realized_path(&installed, &flow, &world).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_fabrics_match_oracle(
        seed in any::<u64>(),
        switches in 4usize..9,
        extra in 0usize..10,
        picks in proptest::collection::vec(0usize..100, 4),
    ) {
        let world = common::random_topology(seed, switches, extra, 3);
        let hosts = ["h1", "h2", "h3"];
        let src = hosts[picks[0] % 3];
        let dest = hosts[(picks[0] % 3 + 1 + picks[1] % 2) % 3];
        let sw = |i: usize| format!("s{}", i % switches + 1);
        let mut must_go = vec![];
        if picks[2] % 3 > 0 { must_go.push(sw(picks[2])); }
        if picks[2] % 3 > 1 && sw(picks[3]) != must_go[0] { must_go.push(sw(picks[3])); }
        let forbidden: BTreeSet<String> = [sw(picks[3] / 7)]
            .into_iter()
            .filter(|f| !must_go.contains(f))
            .collect();
        let q = PathQuery::new(src, dest).via(must_go).avoiding(forbidden);
        check_against_oracle(&world, &q)?;
    }

    #[test]
    fn planned_paths_round_trip_through_rules(src in 1usize..=5, dest in 1usize..=5, via in 1usize..=9) {
        prop_assume!(src != dest);
        let world = fixtures::five_worker();
        let (s, d) = (format!("h{src}"), format!("h{dest}"));
        let q = PathQuery::new(&s, &d).via([format!("s{via}")]);
        let p = plan(&q, &world).unwrap();
        let flow = FlowKey::new(&s, &d);
        let state = ControllerState::for_snapshot(&world);
        let rules = compile_flows(&p, &flow, &state, &world, None).unwrap();
        prop_assert_eq!(rules.len(), p.vertices.len() - 2);
        let installed = state.install(&rules).unwrap();
        prop_assert_eq!(realized_path(&installed, &flow, &world).unwrap(), p);
        // Installing the same rules again changes nothing.
        prop_assert_eq!(installed.install(&rules).unwrap().rule_count(), installed.rule_count());
    }
}
