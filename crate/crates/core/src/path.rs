//! Constrained shortest paths: ordered waypoints, forbidden vertices.
//!
//! Paths are ranked by `(weight, hops)` and ties go to the lexicographically
//! smallest vertex sequence, so every query has exactly one answer.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infra::{InfraSnapshot, VertexKind};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<String>,
    pub total_weight: f64,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_simple(&self) -> bool {
        let set: BTreeSet<&String> = self.vertices.iter().collect();
        set.len() == self.vertices.len()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.vertices.iter().any(|x| x == v)
    }

    /// Total order used for tie-breaking: cost, then hops, then vertex sequence.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        cost_cmp(
            Cost::new(self.total_weight, self.hops()),
            Cost::new(other.total_weight, other.hops()),
        )
        .then_with(|| self.vertices.cmp(&other.vertices))
    }
}

impl std::fmt::Display for Path {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.vertices.join(" -> "))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    Weights,
    Hops,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathQuery {
    pub src: String,
    pub dest: String,
    #[serde(default)]
    pub must_go: Vec<String>,
    #[serde(default)]
    pub forbidden: BTreeSet<String>,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

impl PathQuery {
    pub fn new(src: impl Into<String>, dest: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dest: dest.into(),
            must_go: Vec::new(),
            forbidden: BTreeSet::new(),
            weight_mode: WeightMode::Weights,
        }
    }

    pub fn via<I, S>(mut self, waypoints: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.must_go.extend(waypoints.into_iter().map(Into::into));
        self
    }

    pub fn avoiding<I, S>(mut self, vertices: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.forbidden.extend(vertices.into_iter().map(Into::into));
        self
    }

    pub fn with_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no simple path from {src} to {dest} satisfies the constraints")]
    Infeasible { src: String, dest: String },
}

/// Which stage of the planner produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Independent per-segment optima happened to concatenate into a simple path.
    Segments,
    /// Branch-and-bound over simple paths, seeded by the restricted staged search.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost {
    weight: f64,
    hops: usize,
}

impl Cost {
    const ZERO: Self = Self { weight: 0.0, hops: 0 };

    fn new(weight: f64, hops: usize) -> Self {
        Self { weight, hops }
    }

    fn add(self, w: f64) -> Self {
        Self::new(self.weight + w, self.hops + 1)
    }

    fn plus(self, other: Self) -> Self {
        Self::new(self.weight + other.weight, self.hops + other.hops)
    }
}

fn weight_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

fn cost_cmp(a: Cost, b: Cost) -> Ordering {
    weight_cmp(a.weight, b.weight).then(a.hops.cmp(&b.hops))
}

struct HeapEntry {
    cost: Cost,
    vertex: String,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other
            .cost
            .weight
            .total_cmp(&self.cost.weight)
            .then(other.cost.hops.cmp(&self.cost.hops))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

fn edge_cost(w: f64, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Weights => w,
        WeightMode::Hops => 1.0,
    }
}

/// Distances to `target` from every vertex reachable without touching
/// `blocked` (the target itself is never blocked). Hosts other than the
/// target are dead ends and never relay.
fn distances_to(
    snapshot: &InfraSnapshot,
    target: &str,
    blocked: &BTreeSet<String>,
    mode: WeightMode,
) -> BTreeMap<String, Cost> {
    match mode {
        WeightMode::Weights => dijkstra(snapshot, target, blocked),
        WeightMode::Hops => bfs(snapshot, target, blocked),
    }
}

fn relays(snapshot: &InfraSnapshot, v: &str) -> bool {
    snapshot.vertex_kind(v) != Some(VertexKind::Host)
}

fn dijkstra(snapshot: &InfraSnapshot, target: &str, blocked: &BTreeSet<String>) -> BTreeMap<String, Cost> {
    let mut dist: BTreeMap<String, Cost> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(target.to_string(), Cost::ZERO);
    heap.push(HeapEntry {
        cost: Cost::ZERO,
        vertex: target.to_string(),
    });
    let mut done = BTreeSet::new();
    while let Some(HeapEntry { cost, vertex }) = heap.pop() {
        if !done.insert(vertex.clone()) {
            continue;
        }
        if vertex != target && !relays(snapshot, &vertex) {
            continue;
        }
        for (n, w) in snapshot.neighbors(&vertex).unwrap_or(&[]) {
            if blocked.contains(n) || done.contains(n) {
                continue;
            }
            let cand = cost.add(*w);
            let better = dist
                .get(n)
                .is_none_or(|cur| cand.weight.total_cmp(&cur.weight).then(cand.hops.cmp(&cur.hops)) == Ordering::Less);
            if better {
                dist.insert(n.clone(), cand);
                heap.push(HeapEntry {
                    cost: cand,
                    vertex: n.clone(),
                });
            }
        }
    }
    dist
}

fn bfs(snapshot: &InfraSnapshot, target: &str, blocked: &BTreeSet<String>) -> BTreeMap<String, Cost> {
    let mut dist = BTreeMap::new();
    dist.insert(target.to_string(), Cost::ZERO);
    let mut queue = VecDeque::from([target.to_string()]);
    while let Some(v) = queue.pop_front() {
        if v != target && !relays(snapshot, &v) {
            continue;
        }
        let d = dist[&v];
        for (n, _) in snapshot.neighbors(&v).unwrap_or(&[]) {
            if blocked.contains(n) || dist.contains_key(n) {
                continue;
            }
            dist.insert(n.clone(), Cost::new(d.weight + 1.0, d.hops + 1));
            queue.push_back(n.clone());
        }
    }
    dist
}

/// Walks from `src` to the target of `dist`, at each step taking the
/// smallest-id neighbor that stays on an optimal path.
fn reconstruct(
    snapshot: &InfraSnapshot,
    src: &str,
    dist: &BTreeMap<String, Cost>,
    blocked: &BTreeSet<String>,
    mode: WeightMode,
) -> Option<Vec<String>> {
    let mut at = src.to_string();
    let mut out = vec![at.clone()];
    loop {
        let here = *dist.get(&at)?;
        if here.hops == 0 {
            return Some(out);
        }
        let next = snapshot.neighbors(&at).ok()?.iter().find(|(n, w)| {
            !blocked.contains(n)
                && dist
                    .get(n)
                    .is_some_and(|d| cost_cmp(d.add(edge_cost(*w, mode)), here) == Ordering::Equal)
        })?;
        at = next.0.clone();
        out.push(at.clone());
    }
}

fn path_from(snapshot: &InfraSnapshot, vertices: Vec<String>) -> Path {
    let total_weight = vertices
        .windows(2)
        .map(|p| snapshot.link_weight(&p[0], &p[1]).unwrap_or(f64::INFINITY))
        .sum();
    Path {
        vertices,
        total_weight,
    }
}

fn check_endpoints(snapshot: &InfraSnapshot, src: &str, dest: &str) -> Result<(), PlanError> {
    for v in [src, dest] {
        if !snapshot.has_vertex(v) {
            return Err(PlanError::UnknownVertex(v.to_string()));
        }
    }
    Ok(())
}

/// Minimum-weight path from `src` to `dest` avoiding `forbidden`. Ties are
/// broken by hop count and then by vertex sequence.
pub fn shortest_avoiding(
    snapshot: &InfraSnapshot,
    src: &str,
    dest: &str,
    forbidden: &BTreeSet<String>,
) -> Result<Option<Path>, PlanError> {
    segment(snapshot, src, dest, forbidden, WeightMode::Weights)
}

/// Fewest-hop path from `src` to `dest` avoiding `forbidden`, ignoring weights.
pub fn bfs_fallback(
    snapshot: &InfraSnapshot,
    src: &str,
    dest: &str,
    forbidden: &BTreeSet<String>,
) -> Result<Option<Path>, PlanError> {
    segment(snapshot, src, dest, forbidden, WeightMode::Hops)
}

fn segment(
    snapshot: &InfraSnapshot,
    src: &str,
    dest: &str,
    blocked: &BTreeSet<String>,
    mode: WeightMode,
) -> Result<Option<Path>, PlanError> {
    check_endpoints(snapshot, src, dest)?;
    if src == dest {
        return Ok(Some(path_from(snapshot, vec![src.to_string()])));
    }
    if blocked.contains(src) || blocked.contains(dest) {
        return Ok(None);
    }
    let dist = distances_to(snapshot, dest, blocked, mode);
    Ok(reconstruct(snapshot, src, &dist, blocked, mode).map(|v| path_from(snapshot, v)))
}

/// Plans the optimal simple path for a query.
pub fn plan(query: &PathQuery, snapshot: &InfraSnapshot) -> Result<Path, PlanError> {
    plan_detailed(query, snapshot).map(|(p, _)| p)
}

/// Like [`plan`], also reporting which stage produced the path.
pub fn plan_detailed(query: &PathQuery, snapshot: &InfraSnapshot) -> Result<(Path, Strategy), PlanError> {
    let chain = validate_query(query, snapshot)?;
    let infeasible = || PlanError::Infeasible {
        src: query.src.clone(),
        dest: query.dest.clone(),
    };
    let mode = query.weight_mode;
    let chain_set: BTreeSet<String> = chain.iter().cloned().collect();

    // Stage 1: independent optima per segment. Each is a lower bound for the
    // matching part of any compliant path; if one is missing, so is the answer.
    let mut seg_paths = Vec::with_capacity(chain.len() - 1);
    let mut seg_blocks = Vec::with_capacity(chain.len() - 1);
    for pair in chain.windows(2) {
        let mut blocked = query.forbidden.clone();
        blocked.extend(
            chain_set
                .iter()
                .filter(|v| **v != pair[0] && **v != pair[1])
                .cloned(),
        );
        let seg = segment(snapshot, &pair[0], &pair[1], &blocked, mode)?.ok_or_else(infeasible)?;
        seg_paths.push(seg);
        seg_blocks.push(blocked);
    }
    let joined = join(snapshot, &seg_paths);
    if joined.is_simple() {
        // Lexicographic minimality holds segment by segment because the
        // greedy reconstruction is lex-first within each segment.
        return Ok((joined, Strategy::Segments));
    }

    // Stage 2: sequential search that blocks already-used vertices. Cheap,
    // sometimes suboptimal, but a valid upper bound.
    let seed = restricted_staged(snapshot, &chain, &seg_blocks, mode);

    // Stage 3: exhaustive branch-and-bound, which is exact.
    let seg_mins: Vec<Cost> = seg_paths
        .iter()
        .map(|p| Cost::new(metric_weight(snapshot, p, mode), p.hops()))
        .collect();
    let bounds: Vec<BTreeMap<String, Cost>> = chain
        .windows(2)
        .zip(&seg_blocks)
        .map(|(pair, blocked)| distances_to(snapshot, &pair[1], blocked, mode))
        .collect();
    let mut search = Search {
        snapshot,
        chain: &chain,
        forbidden: &query.forbidden,
        mode,
        bounds: &bounds,
        tails: tail_sums(&seg_mins),
        best: seed.map(|p| {
            let c = Cost::new(metric_weight(snapshot, &p, mode), p.hops());
            (c, p.vertices)
        }),
    };
    let mut stack = vec![chain[0].clone()];
    let mut visited = BTreeSet::from([chain[0].clone()]);
    search.dfs(&mut stack, &mut visited, 1, Cost::ZERO);
    let (_, vertices) = search.best.ok_or_else(infeasible)?;
    Ok((path_from(snapshot, vertices), Strategy::Exhaustive))
}

fn validate_query(query: &PathQuery, snapshot: &InfraSnapshot) -> Result<Vec<String>, PlanError> {
    check_endpoints(snapshot, &query.src, &query.dest)?;
    if query.src == query.dest {
        return Err(PlanError::InvalidQuery("src equals dest".into()));
    }
    let mut seen = BTreeSet::new();
    for w in &query.must_go {
        match snapshot.vertex_kind(w) {
            None => return Err(PlanError::UnknownVertex(w.clone())),
            Some(VertexKind::Host) => {
                return Err(PlanError::InvalidQuery(format!("waypoint `{w}` is a host")))
            }
            Some(VertexKind::Device) => {}
        }
        if query.forbidden.contains(w) {
            return Err(PlanError::InvalidQuery(format!(
                "`{w}` is both a waypoint and forbidden"
            )));
        }
        if !seen.insert(w.as_str()) {
            return Err(PlanError::InvalidQuery(format!("waypoint `{w}` repeats")));
        }
    }
    for end in [&query.src, &query.dest] {
        if query.forbidden.contains(end) && snapshot.vertex_kind(end) == Some(VertexKind::Device) {
            return Err(PlanError::InvalidQuery(format!("endpoint `{end}` is forbidden")));
        }
    }
    // Waypoints equal to an endpoint are satisfied by the endpoint itself.
    let mut chain = vec![query.src.clone()];
    for w in &query.must_go {
        if w == &query.src {
            if chain.len() > 1 {
                return Err(PlanError::InvalidQuery(format!("`{w}` must come first")));
            }
            continue;
        }
        if w == &query.dest {
            if w != query.must_go.last().unwrap() {
                return Err(PlanError::InvalidQuery(format!("`{w}` must come last")));
            }
            continue;
        }
        chain.push(w.clone());
    }
    chain.push(query.dest.clone());
    Ok(chain)
}

fn metric_weight(snapshot: &InfraSnapshot, path: &Path, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Weights => path.total_weight,
        WeightMode::Hops => {
            let _ = snapshot;
            path.hops() as f64
        }
    }
}

fn tail_sums(seg_mins: &[Cost]) -> Vec<Cost> {
    // tails[j] = sum of seg_mins[j..]
    let mut tails = vec![Cost::ZERO; seg_mins.len() + 1];
    for j in (0..seg_mins.len()).rev() {
        tails[j] = tails[j + 1].plus(seg_mins[j]);
    }
    tails
}

fn join(snapshot: &InfraSnapshot, segments: &[Path]) -> Path {
    let mut vertices: Vec<String> = Vec::new();
    for seg in segments {
        let skip = usize::from(!vertices.is_empty());
        vertices.extend(seg.vertices.iter().skip(skip).cloned());
    }
    path_from(snapshot, vertices)
}

fn restricted_staged(
    snapshot: &InfraSnapshot,
    chain: &[String],
    seg_blocks: &[BTreeSet<String>],
    mode: WeightMode,
) -> Option<Path> {
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut parts = Vec::new();
    for (pair, base) in chain.windows(2).zip(seg_blocks) {
        let mut blocked = base.clone();
        blocked.extend(used.iter().filter(|v| **v != pair[0]).cloned());
        let seg = segment(snapshot, &pair[0], &pair[1], &blocked, mode).ok()??;
        used.extend(seg.vertices.iter().cloned());
        parts.push(seg);
    }
    Some(join(snapshot, &parts))
}

struct Search<'a> {
    snapshot: &'a InfraSnapshot,
    chain: &'a [String],
    forbidden: &'a BTreeSet<String>,
    mode: WeightMode,
    /// bounds[j][v]: cheapest way from v to chain[j + 1] within segment j's blocks.
    bounds: &'a [BTreeMap<String, Cost>],
    /// tails[j]: sum of independent segment optima for segments j..
    tails: Vec<Cost>,
    best: Option<(Cost, Vec<String>)>,
}

impl Search<'_> {
    /// `next` is the chain index of the next vertex to reach.
    fn dfs(&mut self, stack: &mut Vec<String>, visited: &mut BTreeSet<String>, next: usize, cost: Cost) {
        let at = stack.last().expect("non-empty").clone();
        let neighbors = match self.snapshot.neighbors(&at) {
            Ok(n) => n,
            Err(_) => return,
        };
        for (n, w) in neighbors {
            if visited.contains(n) || self.forbidden.contains(n) {
                continue;
            }
            let chain_pos = self.chain.iter().position(|c| c == n);
            let next_after = match chain_pos {
                Some(p) if p == next => next + 1,
                Some(_) => continue,
                None if !relays(self.snapshot, n) => continue,
                None => next,
            };
            let step = cost.add(edge_cost(*w, self.mode));
            if next_after == self.chain.len() {
                stack.push(n.clone());
                self.offer(step, stack);
                stack.pop();
                continue;
            }
            let seg = next_after - 1;
            let Some(to_next) = self.bounds[seg].get(n) else {
                continue;
            };
            let lower = step.plus(*to_next).plus(self.tails[next_after]);
            if let Some((best, _)) = &self.best {
                if cost_cmp(lower, *best) == Ordering::Greater {
                    continue;
                }
            }
            stack.push(n.clone());
            visited.insert(n.clone());
            self.dfs(stack, visited, next_after, step);
            visited.remove(n);
            stack.pop();
        }
    }

    fn offer(&mut self, cost: Cost, stack: &[String]) {
        let better = match &self.best {
            None => true,
            Some((best, verts)) => match cost_cmp(cost, *best) {
                Ordering::Less => true,
                Ordering::Equal => stack < verts.as_slice(),
                Ordering::Greater => false,
            },
        };
        if better {
            self.best = Some((cost, stack.to_vec()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(p: &Path) -> Vec<&str> {
        p.vertices.iter().map(String::as_str).collect()
    }

    #[test]
    fn unconstrained_shortest_is_lex_first_of_ties() {
        let w = fixtures::five_worker();
        let p = plan(&PathQuery::new("h2", "h4"), &w).unwrap();
        assert_eq!(ids(&p), ["h2", "s2", "s3", "s4", "h4"]);
        assert_eq!(p.total_weight, 4.0);
    }

    #[test]
    fn waypoint_forces_detour() {
        let w = fixtures::five_worker();
        let p = plan(&PathQuery::new("h2", "h4").via(["s8"]), &w).unwrap();
        assert_eq!(ids(&p), ["h2", "s2", "s8", "s4", "h4"]);
    }

    #[test]
    fn forbidden_waypoint_is_rejected() {
        let w = fixtures::five_worker();
        let q = PathQuery::new("h2", "h4").via(["s8"]).avoiding(["s8"]);
        assert!(matches!(plan(&q, &w), Err(PlanError::InvalidQuery(_))));
    }

    #[test]
    fn isolated_waypoint_is_infeasible() {
        let w = fixtures::five_worker().without_links_of("s8");
        let q = PathQuery::new("h2", "h4").via(["s8"]);
        assert!(matches!(plan(&q, &w), Err(PlanError::Infeasible { .. })));
    }

    #[test]
    fn unknown_vertex() {
        let w = fixtures::five_worker();
        let q = PathQuery::new("h2", "h4").via(["s99"]);
        assert_eq!(plan(&q, &w), Err(PlanError::UnknownVertex("s99".into())));
    }

    #[test]
    fn hops_mode_ignores_weights() {
        let w = fixtures::five_worker();
        // s1-s8 costs 2 but is one hop.
        let q = PathQuery::new("h1", "h4").via(["s8"]).with_mode(WeightMode::Hops);
        let p = plan(&q, &w).unwrap();
        assert_eq!(ids(&p), ["h1", "s1", "s8", "s4", "h4"]);
        let bfs = bfs_fallback(&w, "h1", "h4", &BTreeSet::new()).unwrap().unwrap();
        assert_eq!(bfs.hops(), 3);
    }

    #[test]
    fn ordered_waypoints_needing_backtrack_avoidance() {
        // s8 then s3 from h2 to h4: the per-segment optima share s2, so the
        // exhaustive stage has to resolve it.
        let w = fixtures::five_worker();
        let q = PathQuery::new("h2", "h4").via(["s8", "s3"]);
        let (p, _) = plan_detailed(&q, &w).unwrap();
        assert!(p.is_simple());
        let s8 = p.vertices.iter().position(|v| v == "s8").unwrap();
        let s3 = p.vertices.iter().position(|v| v == "s3").unwrap();
        assert!(s8 < s3);
    }

    #[test]
    fn shortest_avoiding_respects_forbidden() {
        let w = fixtures::five_worker();
        let forbidden: BTreeSet<String> = ["s3".to_string(), "s8".to_string()].into();
        let p = shortest_avoiding(&w, "h2", "h4", &forbidden).unwrap().unwrap();
        assert!(!p.contains("s3") && !p.contains("s8"));
        assert_eq!(p.vertices.first().unwrap(), "h2");
    }
}
