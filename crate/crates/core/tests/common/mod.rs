//! Brute-force oracles and generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use privacy_intent::infra::{InfraSnapshot, LabelSet, ReplicaId, VertexKind};
use privacy_intent::infra::{DeviceEntry, LinkEntry, NodeEntry, TopologyDocument};
use privacy_intent::intent::{LabelPredicate, PlacementClause, PlacementMode, PredicateOp};

/// Every simple path from `src` to `dest` whose interior vertices are all
/// switches, with its total weight.
pub fn all_simple_paths(world: &InfraSnapshot, src: &str, dest: &str) -> Vec<(Vec<String>, f64)> {
    let mut adjacency: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for l in world.links() {
        adjacency.entry(&l.a).or_default().push((&l.b, l.weight));
        adjacency.entry(&l.b).or_default().push((&l.a, l.weight));
    }
    let mut out = Vec::new();
    let mut stack = vec![src.to_string()];
    let mut on: BTreeSet<String> = [src.to_string()].into();
    walk(world, &adjacency, dest, &mut stack, &mut on, 0.0, &mut out);
    out
}

fn walk(
    world: &InfraSnapshot,
    adj: &BTreeMap<&str, Vec<(&str, f64)>>,
    dest: &str,
    stack: &mut Vec<String>,
    on: &mut BTreeSet<String>,
    weight: f64,
    out: &mut Vec<(Vec<String>, f64)>,
) {
    let at = stack.last().unwrap().clone();
    for &(next, w) in adj.get(at.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
        if on.contains(next) {
            continue;
        }
        if next == dest {
            let mut p = stack.clone();
            p.push(next.to_string());
            out.push((p, weight + w));
            continue;
        }
        if world.vertex_kind(next) != Some(VertexKind::Device) {
            continue;
        }
        stack.push(next.to_string());
        on.insert(next.to_string());
        walk(world, adj, dest, stack, on, weight + w, out);
        on.remove(next);
        stack.pop();
    }
}

/// Whether `path` visits every waypoint in the given order and no forbidden vertex.
pub fn path_admissible(path: &[String], must_go: &[String], forbidden: &BTreeSet<String>) -> bool {
    if path.iter().any(|v| forbidden.contains(v)) {
        return false;
    }
    let mut last = None;
    for w in must_go {
        match path.iter().position(|v| v == w) {
            Some(i) if last.is_none_or(|l| i > l) => last = Some(i),
            _ => return false,
        }
    }
    true
}

/// Order used for ties: weight, then hops, then the vertex sequence.
pub fn better(a: &(Vec<String>, f64), b: &(Vec<String>, f64)) -> bool {
    if (a.1 - b.1).abs() > 1e-9 {
        return a.1 < b.1;
    }
    if a.0.len() != b.0.len() {
        return a.0.len() < b.0.len();
    }
    a.0 < b.0
}

/// Best admissible path by exhaustive enumeration.
pub fn oracle_path(
    world: &InfraSnapshot,
    src: &str,
    dest: &str,
    must_go: &[String],
    forbidden: &BTreeSet<String>,
) -> Option<(Vec<String>, f64)> {
    let mut best: Option<(Vec<String>, f64)> = None;
    for cand in all_simple_paths(world, src, dest) {
        if path_admissible(&cand.0, must_go, forbidden) && best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    best
}

/// Predicate evaluation written out from the label semantics: equality and
/// set membership need the key present; inequality holds when it is absent.
pub fn holds(p: &LabelPredicate, labels: &LabelSet) -> bool {
    let value = labels.get(&p.key);
    match p.op {
        PredicateOp::Equals => value == Some(p.values[0].as_str()),
        PredicateOp::NotEquals => value != Some(p.values[0].as_str()),
        PredicateOp::InSet => value.is_some_and(|v| p.values.iter().any(|x| x == v)),
    }
}

pub fn holds_all(ps: &[LabelPredicate], labels: &LabelSet) -> bool {
    ps.iter().all(|p| holds(p, labels))
}

/// Workloads each clause selects.
pub fn selected_workloads(world: &InfraSnapshot, clauses: &[PlacementClause]) -> BTreeSet<String> {
    world
        .workloads()
        .filter(|w| clauses.iter().any(|c| holds_all(&c.workload_selector, &w.labels)))
        .map(|w| w.id.clone())
        .collect()
}

/// Nodes on which `workload` complies with every clause that selects it.
pub fn compliant_nodes(world: &InfraSnapshot, clauses: &[PlacementClause], workload: &str) -> BTreeSet<String> {
    let labels = &world.workload(workload).unwrap().labels;
    world
        .nodes()
        .filter(|n| {
            clauses.iter().filter(|c| holds_all(&c.workload_selector, labels)).all(|c| {
                let all = holds_all(&c.node_predicates, &n.labels);
                match c.mode {
                    PlacementMode::Require => all,
                    PlacementMode::Forbid => !all,
                }
            })
        })
        .map(|n| n.id.clone())
        .collect()
}

/// Smallest achievable maximum node load when every replica of the selected
/// workloads is reassigned to a compliant node, by exhaustive search.
pub fn brute_force_max_load(world: &InfraSnapshot, clauses: &[PlacementClause]) -> Option<u32> {
    let moving = selected_workloads(world, clauses);
    let nodes: Vec<String> = world.nodes().map(|n| n.id.clone()).collect();
    let caps: Vec<u32> = world.nodes().map(|n| n.capacity).collect();
    let mut load = vec![0u32; nodes.len()];
    for (r, n) in world.placements() {
        if !moving.contains(&r.workload) {
            load[nodes.iter().position(|x| x == n).unwrap()] += 1;
        }
    }
    let mut options: Vec<Vec<usize>> = Vec::new();
    for w in &moving {
        let ok = compliant_nodes(world, clauses, w);
        let idx: Vec<usize> = nodes.iter().enumerate().filter(|(_, n)| ok.contains(*n)).map(|(i, _)| i).collect();
        for _ in 0..world.workload(w).unwrap().replicas {
            options.push(idx.clone());
        }
    }
    let mut best = None;
    search(&options, 0, &mut load, &caps, &mut best);
    best
}

fn search(options: &[Vec<usize>], i: usize, load: &mut [u32], caps: &[u32], best: &mut Option<u32>) {
    let current = load.iter().copied().max().unwrap_or(0);
    if best.is_some_and(|b| current >= b) {
        return;
    }
    if i == options.len() {
        *best = Some(current);
        return;
    }
    for &n in &options[i] {
        if load[n] < caps[n] {
            load[n] += 1;
            search(options, i + 1, load, caps, best);
            load[n] -= 1;
        }
    }
}

pub fn replica_count(world: &InfraSnapshot, workload: &str) -> u32 {
    world.replicas_of(workload).count() as u32
}

pub fn replica(w: &str, i: u32) -> ReplicaId {
    ReplicaId::new(w, i)
}

/// A small random switch fabric with `hosts` hosts, each on its own switch.
pub fn random_topology(seed: u64, switches: usize, extra_links: usize, hosts: usize) -> InfraSnapshot {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut doc = TopologyDocument::default();
    for i in 1..=switches {
        let mut labels = BTreeMap::new();
        labels.insert("mfr".to_string(), ["cisco", "huawei", "juniper"][rng.random_range(0..3)].to_string());
        doc.devices.push(DeviceEntry {
            id: format!("s{i}"),
            labels,
        });
    }
    let mut seen = BTreeSet::new();
    let mut link = |a: usize, b: usize, w: f64, doc: &mut TopologyDocument| {
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            doc.links.push(LinkEntry {
                a: format!("s{a}"),
                b: format!("s{b}"),
                weight: Some(w),
            });
        }
    };
    // A spanning chain keeps most queries feasible; chords add alternatives.
    for i in 2..=switches {
        let j = rng.random_range(1..i);
        let w = rng.random_range(1..=4) as f64;
        link(i, j, w, &mut doc);
    }
    for _ in 0..extra_links {
        let a = rng.random_range(1..=switches);
        let b = rng.random_range(1..=switches);
        let w = rng.random_range(1..=4) as f64;
        link(a, b, w, &mut doc);
    }
    for h in 1..=hosts {
        doc.nodes.push(NodeEntry {
            id: format!("worker-{h}"),
            labels: BTreeMap::new(),
            capacity: None,
        });
        doc.hosts.push(privacy_intent::infra::Host {
            id: format!("h{h}"),
            attached_switch: format!("s{h}"),
            attached_node: Some(format!("worker-{h}")),
        });
        doc.links.push(LinkEntry {
            a: format!("h{h}"),
            b: format!("s{h}"),
            weight: Some(1.0),
        });
    }
    InfraSnapshot::from_document(doc).expect("generated topology is valid")
}
