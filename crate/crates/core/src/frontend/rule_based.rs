//! Deterministic grammar-driven interpreter.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::{Captures, Regex};

use super::grammar::{grammar_spec, ProductionKind, LEAD_IN};
use super::{ground, intent_id_for, scope_for, InterpretError, Interpretation, Interpreter};
use crate::infra::SnapshotSummary;
use crate::intent::{DeviceSelector, Domain, LabelPredicate, PlacementClause, RoutingClause, StructuredIntent};

struct Compiled {
    name: &'static str,
    kind: ProductionKind,
    re: Regex,
}

static PRODUCTIONS: LazyLock<Vec<Compiled>> = LazyLock::new(|| {
    grammar_spec()
        .productions
        .into_iter()
        .map(|p| Compiled {
            name: p.name,
            kind: p.kind,
            re: Regex::new(p.pattern).expect("grammar patterns are valid"),
        })
        .collect()
});

static LEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(LEAD_IN).expect("valid"));
static SEPARATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s*(?:;|,\s*and also\s+|,\s*and then\s+|,\s*and\s+|,|\s+and also\s+)\s*").expect("valid"));
static WAYPOINT_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s*(?:,\s*)?(?:and then|then|and|,)\s+").expect("valid"));
static LIST_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s*(?:,\s*(?:and |or )?|\s+and\s+|\s+or\s+)\s*").expect("valid"));
static HOST_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^host\s*(?:h)?(\d+)$").expect("valid"));
static DEVICE_WITH_ID: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:(?P<desc>.+?) )?(?:switch|router|device) (?P<id>[a-z0-9:_.-]+)$").expect("valid")
});
static DEVICE_BY_DESC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<desc>.+?) (?:switch|router|device)$").expect("valid"));
static DEVICE_SET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:(?P<pre>.+?) (?:switches|routers|devices)|(?:switches|routers|devices) (?:made by|from|by|in|running|speaking|located in) (?P<post>.+))$")
        .expect("valid")
});

/// Fragment separated from its neighbors, matched but not yet grounded.
#[derive(Debug, Clone)]
struct Parsed {
    kind: ProductionKind,
    production: &'static str,
    groups: Vec<(&'static str, String)>,
}

impl Parsed {
    fn get(&self, name: &str) -> Option<&str> {
        self.groups.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_str())
    }

    fn req(&self, name: &str) -> &str {
        self.get(name).unwrap_or_default()
    }
}

fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase().replace('~', " ");
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', '!', ' '])
        .trim()
        .to_string()
}

fn match_fragment(fragment: &str) -> Option<Parsed> {
    let stripped = LEAD.replace(fragment.trim(), "");
    let stripped = stripped.trim();
    if stripped.is_empty() {
        return None;
    }
    PRODUCTIONS.iter().find_map(|p| {
        p.re.captures(stripped).map(|caps: Captures<'_>| Parsed {
            kind: p.kind,
            production: p.name,
            groups: p
                .re
                .capture_names()
                .flatten()
                .filter_map(|n| {
                    let name: &'static str = ["w", "n", "src", "dst", "via", "avoid", "a", "b"]
                        .into_iter()
                        .find(|k| *k == n)?;
                    caps.name(n).map(|m| (name, m.as_str().trim().to_string()))
                })
                .collect(),
        })
    })
}

/// Matches a fragment. A bare `and` splits it when both halves parse on
/// their own; otherwise the fragment must match as a whole.
fn parse_piece(piece: &str, out: &mut Vec<Parsed>) -> bool {
    for (idx, _) in piece.match_indices(" and ") {
        let (left, right) = (&piece[..idx], &piece[idx + 5..]);
        let mut attempt = Vec::new();
        if parse_piece(left, &mut attempt) && parse_piece(right, &mut attempt) {
            out.extend(attempt);
            return true;
        }
    }
    match match_fragment(piece) {
        Some(p) => {
            out.push(p);
            true
        }
        None => false,
    }
}

fn parse_sentence(text: &str) -> Result<Vec<Parsed>, InterpretError> {
    let norm = normalize(text);
    if norm.is_empty() {
        return Err(InterpretError::Unparseable("empty input".into()));
    }
    let mut out = Vec::new();
    for piece in SEPARATOR.split(&norm).filter(|p| !p.trim().is_empty()) {
        if !parse_piece(piece, &mut out) {
            return Err(InterpretError::Unparseable(format!("no production matches `{}`", piece.trim())));
        }
    }
    Ok(out)
}

/// Syntax-only domain classification.
pub fn classify(text: &str) -> Result<Domain, InterpretError> {
    let parsed = parse_sentence(text)?;
    let placement = parsed.iter().filter(|p| p.kind.is_placement()).count();
    Ok(Domain::from_clause_mix(placement, parsed.len() - placement).expect("at least one fragment"))
}

/// Names of the productions a sentence matched, in order.
pub fn matched_productions(text: &str) -> Result<Vec<&'static str>, InterpretError> {
    Ok(parse_sentence(text)?.into_iter().map(|p| p.production).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedInterpreter;

impl RuleBasedInterpreter {
    pub fn new() -> Self {
        Self
    }

    /// Parses and grounds a sentence against `summary`.
    pub fn parse(&self, text: &str, summary: &SnapshotSummary) -> Result<StructuredIntent, InterpretError> {
        let parsed = parse_sentence(text)?;
        let mut placement = Vec::new();
        let mut routing = Vec::new();
        let ctx = Ctx { summary };
        for p in &parsed {
            match p.kind {
                ProductionKind::PlacementRequire => {
                    let selector = ctx.workload_selector(p.req("w"))?;
                    if selector.is_empty() {
                        return Err(InterpretError::Unparseable(
                            "a placement requirement needs a specific workload".into(),
                        ));
                    }
                    placement.push(PlacementClause::require(selector, ctx.node_predicates(p.req("n"))?));
                }
                ProductionKind::PlacementForbid => {
                    placement.push(PlacementClause::forbid(
                        ctx.workload_selector(p.req("w"))?,
                        ctx.node_predicates(p.req("n"))?,
                    ));
                }
                ProductionKind::RoutingVia | ProductionKind::RoutingAvoid => {
                    let src = ctx.endpoint(p.req("src"))?;
                    let dst = ctx.endpoint(p.req("dst"))?;
                    routing.push(ctx.routing(src, dst, p.get("via"), p.get("avoid"))?);
                }
                ProductionKind::RoutingBetweenVia | ProductionKind::RoutingBetweenAvoid => {
                    let a = ctx.endpoint(p.req("a"))?;
                    let b = ctx.endpoint(p.req("b"))?;
                    routing.push(ctx.routing(a.clone(), b.clone(), p.get("via"), p.get("avoid"))?);
                    routing.push(ctx.routing(b, a, p.get("via"), p.get("avoid"))?);
                }
                ProductionKind::RoutingFanIn => {
                    let dst = ctx.endpoint(p.req("dst"))?;
                    let mut hosts: Vec<&str> = summary.hosts.iter().map(|h| h.id.as_str()).collect();
                    hosts.sort();
                    for h in hosts.into_iter().filter(|h| *h != dst) {
                        routing.push(ctx.routing(h.to_string(), dst.clone(), p.get("via"), None)?);
                    }
                }
            }
        }
        let intent = StructuredIntent::from_clauses(intent_id_for(text), placement, routing, Some(text.to_string()))
            .map_err(|e| InterpretError::Unparseable(e.to_string()))?;
        ground(&intent, summary)?;
        Ok(intent)
    }
}

impl Interpreter for RuleBasedInterpreter {
    fn name(&self) -> &str {
        "rule-based"
    }

    fn interpret(&self, text: &str, summary: &SnapshotSummary) -> Result<Interpretation, InterpretError> {
        let scope = scope_for(classify(text)?);
        let scoped = summary.restrict(scope);
        let intent = self.parse(text, &scoped)?;
        Ok(Interpretation {
            intent,
            scope,
            trace: None,
            tokens: None,
        })
    }
}

/// Region names mapped to the cities they contain. Only cities that appear in
/// the summary are used.
const REGIONS: &[(&[&str], &[&str])] = &[
    (
        &["eu", "europe", "european", "european union"],
        &[
            "amsterdam", "berlin", "brussels", "dublin", "frankfurt", "lisbon", "madrid", "milan", "paris", "rome",
            "stockholm", "vienna", "warsaw",
        ],
    ),
    (
        &["us", "usa", "united states", "america", "north america"],
        &["newyork", "sanfrancisco", "seattle", "chicago", "virginia", "oregon", "boston", "dallas"],
    ),
    (
        &["asia", "apac", "asia pacific", "asia-pacific"],
        &["beijing", "tokyo", "singapore", "mumbai", "seoul", "hongkong", "shanghai", "sydney"],
    ),
    (&["china"], &["beijing", "shanghai", "shenzhen", "hongkong"]),
    (&["uk", "britain", "united kingdom"], &["london", "manchester"]),
    (&["oceania", "australia"], &["sydney", "melbourne"]),
    (&["canada"], &["toronto", "montreal", "vancouver"]),
];

const NODE_FILLER: &[&str] = &[
    "the", "a", "an", "any", "nodes", "node", "zone", "zones", "workers", "worker", "machines", "servers",
    "located", "hosted", "by", "run", "in", "on", "at", "of", "only", "provider", "providers", "datacenter",
    "datacenters", "data", "center", "centers", "region", "regions", "that", "are", "labeled", "with",
];

const WORKLOAD_SUFFIXES: &[&str] = &[
    " pods", " pod", " services", " service", " workloads", " workload", " replicas", " instances", " containers",
    " deployments", " deployment", " apps", " app", " data", " records", " information",
];

struct Ctx<'a> {
    summary: &'a SnapshotSummary,
}

fn slug(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("-")
}

fn singular(s: &str) -> Option<&str> {
    s.strip_suffix('s').filter(|x| !x.is_empty())
}

fn strip_articles(s: &str) -> &str {
    let mut s = s.trim();
    for art in ["the ", "all ", "any ", "every ", "our "] {
        if let Some(rest) = s.strip_prefix(art) {
            s = rest.trim();
        }
    }
    s
}

impl Ctx<'_> {
    /// A workload phrase as a selector over workload labels.
    fn workload_selector(&self, phrase: &str) -> Result<Vec<LabelPredicate>, InterpretError> {
        let mut p = strip_articles(phrase).to_string();
        loop {
            let before = p.len();
            for suf in WORKLOAD_SUFFIXES {
                if let Some(rest) = p.strip_suffix(suf) {
                    p = rest.trim().to_string();
                }
            }
            if p.len() == before {
                break;
            }
        }
        if matches!(p.as_str(), "" | "workloads" | "everything" | "anything" | "pods" | "services") {
            return Ok(Vec::new());
        }
        if let Some(app) = self.known_app(&p) {
            return Ok(vec![LabelPredicate::equals("app", app)]);
        }
        let parts: Vec<&str> = LIST_SPLIT.split(&p).map(str::trim).filter(|s| !s.is_empty()).collect();
        if parts.len() > 1 {
            let apps: Option<Vec<String>> = parts.iter().map(|x| self.known_app(strip_articles(x))).collect();
            if let Some(mut apps) = apps {
                apps.dedup();
                return Ok(vec![LabelPredicate::in_set("app", apps)]);
            }
        }
        if let Some(sel) = self.category(&p) {
            return Ok(sel);
        }
        for suf in [" databases", " database", " dbs", " db"] {
            if let Some(name) = p.strip_suffix(suf) {
                return Ok(vec![LabelPredicate::equals("app", format!("{}-db", slug(name)))]);
            }
        }
        Err(InterpretError::UnknownIdentifier(p))
    }

    fn known_app(&self, phrase: &str) -> Option<String> {
        let candidates = [Some(slug(phrase)), singular(phrase).map(slug)];
        for c in candidates.into_iter().flatten() {
            if let Some(w) = self.summary.workloads.iter().find(|w| w.id == c) {
                return w.labels.get("app").map(str::to_string);
            }
            if self.summary.workloads.iter().any(|w| w.labels.get("app") == Some(c.as_str())) {
                return Some(c);
            }
        }
        None
    }

    /// Category words (`sensitive`, `databases`, ...) mapped to label values.
    fn category(&self, phrase: &str) -> Option<Vec<LabelPredicate>> {
        let mut preds: Vec<LabelPredicate> = Vec::new();
        for word in phrase.split_whitespace() {
            let (key, value) = match word {
                "sensitive" | "phi" | "phi-processing" | "health" | "medical" => ("data-type", "phi"),
                "general" | "non-sensitive" | "public" => ("data-type", "general"),
                "database" | "databases" | "db" | "dbs" => ("tier", "database"),
                "application" | "applications" => ("tier", "application"),
                "auxiliary" => ("tier", "auxiliary"),
                "data" | "information" => continue,
                _ => return None,
            };
            if !self.summary.workload_label_values(key).contains(value) {
                return None;
            }
            let pred = LabelPredicate::equals(key, value);
            if !preds.contains(&pred) {
                preds.push(pred);
            }
        }
        (!preds.is_empty()).then_some(preds)
    }

    /// A node description (`high-security cloud nodes`, `london or sydney`) as predicates.
    fn node_predicates(&self, phrase: &str) -> Result<Vec<LabelPredicate>, InterpretError> {
        let tokens: Vec<String> = phrase
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty() && !NODE_FILLER.contains(t))
            .map(str::to_string)
            .collect();
        let alternatives: Vec<&[String]> = tokens.split(|t| t == "or").filter(|g| !g.is_empty()).collect();
        if alternatives.len() > 1 {
            let mut key = None;
            let mut values = Vec::new();
            for alt in alternatives {
                let preds = self.node_terms(alt)?;
                for p in preds {
                    if key.get_or_insert_with(|| p.key.clone()) != &p.key {
                        return Err(InterpretError::Unparseable(format!(
                            "alternatives in `{phrase}` mix different labels"
                        )));
                    }
                    values.extend(p.values);
                }
            }
            values.dedup();
            return Ok(vec![LabelPredicate::in_set(key.expect("non-empty"), values)]);
        }
        let preds = self.node_terms(&tokens)?;
        if preds.is_empty() {
            return Err(InterpretError::Unparseable(format!("no node property in `{phrase}`")));
        }
        Ok(preds)
    }

    fn node_terms(&self, tokens: &[String]) -> Result<Vec<LabelPredicate>, InterpretError> {
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).filter(|t| *t != "and").collect();
        let mut preds: Vec<LabelPredicate> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut matched = None;
            for width in (1..=3.min(tokens.len() - i)).rev() {
                let window = &tokens[i..i + width];
                if let Some(p) = self.node_term(window)? {
                    matched = Some((p, width));
                    break;
                }
            }
            let Some((p, width)) = matched else {
                return Err(InterpretError::UnknownIdentifier(tokens[i].to_string()));
            };
            if !preds.contains(&p) {
                preds.push(p);
            }
            i += width;
        }
        Ok(preds)
    }

    fn node_term(&self, window: &[&str]) -> Result<Option<LabelPredicate>, InterpretError> {
        let spaced = window.join(" ");
        if let [level, "security"] = window {
            return Ok(Some(LabelPredicate::equals("security", *level)));
        }
        if window.len() == 1 {
            let w = window[0];
            if let Some(level) = w.strip_suffix("-security") {
                return Ok(Some(LabelPredicate::equals("security", level)));
            }
            if w == "secure" {
                return Ok(Some(LabelPredicate::equals("security", "high")));
            }
        }
        for candidate in [window.concat(), window.join("-"), spaced.clone()] {
            let keys: BTreeSet<&str> = self
                .summary
                .nodes
                .iter()
                .flat_map(|n| n.labels.iter())
                .filter(|(_, v)| *v == candidate)
                .map(|(k, _)| k)
                .collect();
            match keys.len() {
                0 => {}
                1 => {
                    let key = keys.into_iter().next().expect("one key");
                    return Ok(Some(LabelPredicate::equals(key, candidate)));
                }
                _ => {
                    return Err(InterpretError::AmbiguousEndpoints(format!(
                        "`{candidate}` is a value of several node labels"
                    )))
                }
            }
        }
        if let Some((_, cities)) = REGIONS.iter().find(|(names, _)| names.contains(&spaced.as_str())) {
            let present = self.summary.node_label_values("location");
            let hit: Vec<&str> = cities.iter().copied().filter(|c| present.contains(c)).collect();
            return match hit.as_slice() {
                [] => Err(InterpretError::UnknownIdentifier(format!("{spaced} region"))),
                [one] => Ok(Some(LabelPredicate::equals("location", *one))),
                many => Ok(Some(LabelPredicate::in_set("location", many.iter().copied()))),
            };
        }
        Ok(None)
    }

    /// A host, device or workload reference used as a flow endpoint.
    fn endpoint(&self, phrase: &str) -> Result<String, InterpretError> {
        let p = strip_articles(phrase);
        if let Some(c) = HOST_REF.captures(p) {
            let id = format!("h{}", &c[1]);
            return if self.summary.has_host(&id) {
                Ok(id)
            } else {
                Err(InterpretError::UnknownIdentifier(p.to_string()))
            };
        }
        if self.summary.has_host(p) {
            return Ok(p.to_string());
        }
        if let Ok(id) = self.device(p) {
            return Ok(id);
        }
        let mut w = p.to_string();
        for suf in WORKLOAD_SUFFIXES {
            if let Some(rest) = w.strip_suffix(suf) {
                w = rest.trim().to_string();
            }
        }
        let id = slug(&w);
        if self.summary.has_workload(&id) {
            return Ok(id);
        }
        Err(InterpretError::UnknownIdentifier(p.to_string()))
    }

    /// A single device: `s8`, `switch s8`, `the backup switch s8`, `the backup switch`.
    fn device(&self, phrase: &str) -> Result<String, InterpretError> {
        let p = strip_articles(phrase);
        if self.summary.has_device(p) {
            return Ok(p.to_string());
        }
        if let Some(c) = DEVICE_WITH_ID.captures(p) {
            let id = c["id"].to_string();
            if let Some(dev) = self.summary.device(&id) {
                if let Some(desc) = c.name("desc") {
                    for word in desc.as_str().split_whitespace() {
                        if !dev.labels.iter().any(|(_, v)| v == word) {
                            return Err(InterpretError::UnknownIdentifier(format!("{word} {id}")));
                        }
                    }
                }
                return Ok(id);
            }
            return Err(InterpretError::UnknownIdentifier(id));
        }
        if let Some(c) = DEVICE_BY_DESC.captures(p) {
            let words: Vec<&str> = c["desc"].split_whitespace().collect();
            let hits: Vec<&str> = self
                .summary
                .devices
                .iter()
                .filter(|d| words.iter().all(|w| d.labels.iter().any(|(_, v)| v == *w)))
                .map(|d| d.id.as_str())
                .collect();
            return match hits.as_slice() {
                [one] => Ok(one.to_string()),
                [] => Err(InterpretError::UnknownIdentifier(p.to_string())),
                _ => Err(InterpretError::AmbiguousEndpoints(format!("`{p}` matches {}", hits.join(", ")))),
            };
        }
        Err(InterpretError::UnknownIdentifier(p.to_string()))
    }

    fn waypoints(&self, list: &str) -> Result<Vec<String>, InterpretError> {
        WAYPOINT_SPLIT
            .split(list)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.device(s))
            .collect()
    }

    fn forbidden(&self, list: &str) -> Result<Vec<DeviceSelector>, InterpretError> {
        let mut out = Vec::new();
        let trimmed = strip_articles(list);
        // `huawei and juniper switches` distributes the noun over the list.
        let (items, noun): (Vec<&str>, Option<&str>) = match DEVICE_SET.captures(trimmed) {
            Some(c) if c.name("pre").is_some() => {
                let pre = c.name("pre").expect("checked").as_str();
                (LIST_SPLIT.split(pre).collect(), Some("switches"))
            }
            _ => (LIST_SPLIT.split(trimmed).collect(), None),
        };
        for item in items.into_iter().map(str::trim).filter(|s| !s.is_empty()) {
            let phrase = match noun {
                Some(n) if self.device(item).is_err() => format!("{item} {n}"),
                _ => item.to_string(),
            };
            if let Ok(id) = self.device(&phrase) {
                out.push(DeviceSelector::Id(id));
                continue;
            }
            out.push(DeviceSelector::Label(self.device_label(&phrase)?));
        }
        Ok(out)
    }

    fn device_label(&self, phrase: &str) -> Result<LabelPredicate, InterpretError> {
        let p = strip_articles(phrase);
        let desc = DEVICE_SET
            .captures(p)
            .and_then(|c| c.name("pre").or(c.name("post")).map(|m| m.as_str().to_string()))
            .unwrap_or_else(|| p.to_string());
        let desc = strip_articles(&desc);
        match desc {
            "untrusted" | "non-trusted" | "not trusted" => return Ok(LabelPredicate::equals("trusted", "no")),
            "trusted" => return Ok(LabelPredicate::equals("trusted", "yes")),
            _ => {}
        }
        for candidate in [desc.to_string(), slug(desc), desc.replace(' ', "")] {
            let keys: BTreeSet<&str> = self
                .summary
                .devices
                .iter()
                .flat_map(|d| d.labels.iter())
                .filter(|(_, v)| *v == candidate)
                .map(|(k, _)| k)
                .collect();
            match keys.len() {
                0 => {}
                1 => return Ok(LabelPredicate::equals(keys.into_iter().next().expect("one"), candidate)),
                _ => {
                    return Err(InterpretError::AmbiguousEndpoints(format!(
                        "`{candidate}` is a value of several device labels"
                    )))
                }
            }
        }
        Err(InterpretError::UnknownIdentifier(p.to_string()))
    }

    fn routing(
        &self,
        src: String,
        dest: String,
        via: Option<&str>,
        avoid: Option<&str>,
    ) -> Result<RoutingClause, InterpretError> {
        let mut clause = RoutingClause::between(src, dest);
        if let Some(v) = via {
            clause.must_go = self.waypoints(v)?;
        }
        if let Some(a) = avoid {
            clause.forbidden = self.forbidden(a)?;
        }
        Ok(clause)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::infra::{condense, StateScope};
    use crate::intent::PlacementMode;

    fn summary() -> SnapshotSummary {
        condense(&fixtures::five_worker(), StateScope::Both)
    }

    fn parse(text: &str) -> Result<StructuredIntent, InterpretError> {
        RuleBasedInterpreter.parse(text, &summary())
    }

    #[test]
    fn networking_waypoint_sentence() {
        let i = parse("Ensure that all traffic from host~2 to host~4 must traverse the backup switch s8.").unwrap();
        assert_eq!(i.domain, Domain::Networking);
        assert_eq!(i.routing_clauses, [RoutingClause::between("h2", "h4").via(["s8"])]);
    }

    #[test]
    fn hybrid_sentence() {
        let i = parse(
            "Run appointment only on high-security cloud nodes, enforce that all other hosts communicating with \
             host 4 must pass through the backup switch s8, and prevent sensitive databases from being deployed \
             in the edge zone.",
        )
        .unwrap();
        assert_eq!(i.domain, Domain::Hybrid);
        assert_eq!(i.placement_clauses.len(), 2);
        assert_eq!(i.routing_clauses.len(), 4);
        assert_eq!(
            i.placement_clauses[0].node_predicates,
            [LabelPredicate::equals("security", "high"), LabelPredicate::equals("zone", "cloud")]
        );
        assert_eq!(i.placement_clauses[1].mode, PlacementMode::Forbid);
        assert_eq!(
            i.placement_clauses[1].workload_selector,
            [LabelPredicate::equals("data-type", "phi"), LabelPredicate::equals("tier", "database")]
        );
        let srcs: Vec<_> = i.routing_clauses.iter().map(|c| c.src.clone().unwrap()).collect();
        assert_eq!(srcs, ["h1", "h2", "h3", "h5"]);
    }

    #[test]
    fn unenforceable_workload_still_parses() {
        let i = parse("Prohibit financial database service deployment in the cloud zone.").unwrap();
        assert_eq!(
            i.placement_clauses[0].workload_selector,
            [LabelPredicate::equals("app", "financial-db")]
        );
    }

    #[test]
    fn missing_region_is_unknown_identifier() {
        assert_eq!(
            parse("Keep patient data in the EU region."),
            Err(InterpretError::UnknownIdentifier("eu region".into()))
        );
        let s13 = condense(&fixtures::thirteen_worker(), StateScope::Both);
        let i = RuleBasedInterpreter.parse("Keep the patient service in the EU region.", &s13).unwrap();
        assert_eq!(i.placement_clauses[0].node_predicates[0].key, "location");
    }

    #[test]
    fn unparseable_and_unknown() {
        assert!(matches!(parse("make it secure"), Err(InterpretError::Unparseable(_))));
        assert!(matches!(
            parse("traffic from host 2 to host 9 must traverse s8"),
            Err(InterpretError::UnknownIdentifier(_))
        ));
        assert!(matches!(
            parse("traffic from host 2 to host 4 must traverse the core switch s8"),
            Err(InterpretError::UnknownIdentifier(_))
        ));
    }

    #[test]
    fn avoid_lists_and_labels() {
        let i = parse("Traffic from host 1 to host 5 must avoid cisco and juniper switches").unwrap();
        assert_eq!(
            i.routing_clauses[0].forbidden,
            [
                DeviceSelector::Label(LabelPredicate::equals("mfr", "cisco")),
                DeviceSelector::Label(LabelPredicate::equals("mfr", "juniper"))
            ]
        );
        let i = parse("Traffic from host 1 to host 4 must avoid untrusted switches and s7").unwrap();
        assert_eq!(
            i.routing_clauses[0].forbidden,
            [
                DeviceSelector::Label(LabelPredicate::equals("trusted", "no")),
                DeviceSelector::Id("s7".into())
            ]
        );
    }

    #[test]
    fn between_expands_both_directions() {
        let i = parse("traffic between host 1 and host 5 must avoid huawei switches").unwrap();
        assert_eq!(i.routing_clauses.len(), 2);
        assert_eq!(i.routing_clauses[1].src.as_deref(), Some("h5"));
    }

    #[test]
    fn bare_and_splits_when_both_sides_parse() {
        let i = parse("run doctor only on azure nodes and keep phi workloads off edge nodes").unwrap();
        assert_eq!(i.placement_clauses.len(), 2);
    }

    #[test]
    fn ordered_waypoints() {
        let i = parse("traffic from host 2 to host 4 must traverse s8 and then s3").unwrap();
        assert_eq!(i.routing_clauses[0].must_go, ["s8", "s3"]);
    }

    #[test]
    fn location_alternatives() {
        let i = parse("restrict the vital sign monitor to london or sydney nodes").unwrap();
        assert_eq!(
            i.placement_clauses[0].node_predicates,
            [LabelPredicate::in_set("location", ["london", "sydney"])]
        );
    }

    #[test]
    fn classification_is_syntactic() {
        assert_eq!(classify("prohibit x deployment in y").unwrap(), Domain::Computing);
        assert!(classify("hello").is_err());
    }
}
